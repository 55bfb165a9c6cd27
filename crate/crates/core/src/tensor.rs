//! Dense row-major `f64` tensors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Elementwise binary operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ewise {
    Add,
    Sub,
    Mul,
}

/// Dense n-dimensional array stored contiguously in row-major order.
///
/// Every dimension is positive and `data.len()` always equals the product of
/// the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::Dimension(format!("shape {shape:?} must have at least one axis and only positive sizes")));
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        if numel(shape) != data.len() {
            return Err(Error::Dimension(format!("shape {shape:?} needs {} values, got {}", numel(shape), data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Panics on a zero-sized or empty shape.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    /// Panics on a zero-sized or empty shape.
    pub fn full(shape: &[usize], value: f64) -> Self {
        check_shape(shape).expect("tensor shape");
        Self { shape: shape.to_vec(), data: vec![value; numel(shape)] }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(&[n], data)
    }

    /// 2-D tensor from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(&[r, c], rows.concat())
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn expect_same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!("{what}: shapes {:?} and {:?} differ", self.shape, other.shape)));
        }
        Ok(())
    }

    pub fn ewise(&self, other: &Tensor, op: Ewise) -> Result<Tensor> {
        self.expect_same_shape(other, "elementwise op")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                Ewise::Add => a + b,
                Ewise::Sub => a - b,
                Ewise::Mul => a * b,
            })
            .collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.ewise(other, Ewise::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.ewise(other, Ewise::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.ewise(other, Ewise::Mul)
    }

    pub fn add_scalar(&self, s: f64) -> Tensor {
        self.map(|v| v + s)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_same_shape(other, "accumulate")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Adds a bias vector along the last axis, broadcast over all leading axes.
    ///
    /// This is the only broadcasting the tensor type performs.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let last = *self.shape.last().unwrap_or(&0);
        if bias.rank() != 1 || bias.len() != last {
            return Err(Error::Dimension(format!(
                "bias {:?} does not match trailing axis of {:?}",
                bias.shape, self.shape
            )));
        }
        let mut out = self.clone();
        for row in out.data.chunks_mut(last) {
            for (v, b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(out)
    }

    /// `c[i][j] = Σ_t a[i][t] · b[t][j]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::Dimension(format!("matmul of {:?} and {:?}", self.shape, other.shape)));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for t in 0..k {
                let a = self.data[i * k + t];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[t * n..(t + 1) * n];
                for (c, b) in row.iter_mut().zip(brow) {
                    *c += a * b;
                }
            }
        }
        Tensor::new(&[m, n], out)
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[1] {
            return Err(Error::Dimension(format!("matmul_t of {:?} and {:?}", self.shape, other.shape)));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[0]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = dot(a, b);
            }
        }
        Tensor::new(&[m, n], out)
    }

    /// `aᵀ · b` without materializing the transpose.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[0] != other.shape[0] {
            return Err(Error::Dimension(format!("t_matmul of {:?} and {:?}", self.shape, other.shape)));
        }
        let (k, m, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        for t in 0..k {
            let brow = &other.data[t * n..(t + 1) * n];
            for i in 0..m {
                let a = self.data[t * m + i];
                if a == 0.0 {
                    continue;
                }
                let row = &mut out[i * n..(i + 1) * n];
                for (c, b) in row.iter_mut().zip(brow) {
                    *c += a * b;
                }
            }
        }
        Tensor::new(&[m, n], out)
    }

    pub fn transpose(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::Dimension(format!("transpose of {:?}", self.shape)));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::new(&[c, r], out)
    }

    /// Swaps the last two axes of a rank-3 tensor: `[A×B×C] → [A×C×B]`.
    pub fn swap_last_axes(&self) -> Result<Tensor> {
        if self.rank() != 3 {
            return Err(Error::Dimension(format!("swap_last_axes of {:?}", self.shape)));
        }
        let (a, b, c) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = vec![0.0; a * b * c];
        for i in 0..a {
            for j in 0..b {
                for k in 0..c {
                    out[(i * c + k) * b + j] = self.data[(i * b + j) * c + k];
                }
            }
        }
        Tensor::new(&[a, c, b], out)
    }

    /// Sums over axis 0 of a 2-D tensor (column sums).
    pub fn sum_rows(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::Dimension(format!("sum_rows of {:?}", self.shape)));
        }
        let c = self.shape[1];
        let mut out = vec![0.0; c];
        for row in self.data.chunks(c) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Tensor::new(&[c], out)
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = tensors.first().ok_or_else(|| Error::Dimension("concat of an empty list".into()))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(Error::Dimension(format!("concat axis {axis} out of range for rank {rank}")));
        }
        for t in tensors {
            let compatible =
                t.rank() == rank && t.shape.iter().zip(&first.shape).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::Dimension(format!(
                    "cannot concat {:?} with {:?} on axis {axis}",
                    first.shape, t.shape
                )));
            }
        }
        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let mut shape = first.shape.clone();
        shape[axis] = tensors.iter().map(|t| t.shape[axis]).sum();
        let mut data = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for t in tensors {
                let block = t.shape[axis] * inner;
                data.extend_from_slice(&t.data[o * block..(o + 1) * block]);
            }
        }
        Tensor::new(&shape, data)
    }

    /// Copies `len` entries starting at `start` along `axis`.
    pub fn slice_axis(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.rank() || len == 0 || start + len > self.shape[axis] {
            return Err(Error::Dimension(format!(
                "slice [{start}, {}) on axis {axis} of {:?}",
                start + len,
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let full = self.shape[axis] * inner;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * full + start * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Tensor::new(&shape, data)
    }

    /// Splits along `axis` into pieces of the given sizes.
    pub fn split_axis(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>> {
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &s in sizes {
            out.push(self.slice_axis(axis, start, s)?);
            start += s;
        }
        if axis < self.rank() && start != self.shape[axis] {
            return Err(Error::Dimension(format!(
                "split sizes {sizes:?} do not cover axis {axis} of {:?}",
                self.shape
            )));
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity_and_zero() {
        let b = t2(&[&[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(Tensor::eye(2).matmul(&b).unwrap(), b);
        let z = Tensor::zeros(&[2, 3]).matmul(&Tensor::full(&[3, 4], 7.5)).unwrap();
        assert_eq!(z, Tensor::zeros(&[2, 4]));
    }

    #[test]
    fn matmul_small_case() {
        let a = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = t2(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(a.matmul(&b).unwrap(), t2(&[&[19.0, 22.0], &[43.0, 50.0]]));
        assert_eq!(a.matmul_t(&b.transpose().unwrap()).unwrap(), a.matmul(&b).unwrap());
        assert_eq!(a.transpose().unwrap().t_matmul(&b).unwrap(), a.matmul(&b).unwrap());
    }

    #[test]
    fn matmul_mismatch_names_shapes() {
        let err = Tensor::zeros(&[2, 3]).matmul(&Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = alloc::string::ToString::to_string(&err);
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn concat_cases() {
        let parts: Vec<Tensor> = (0..3).map(|i| Tensor::full(&[1, 2], i as f64)).collect();
        let refs: Vec<&Tensor> = parts.iter().collect();
        assert_eq!(Tensor::concat(&refs, 1).unwrap().shape(), &[1, 6]);
        assert_eq!(Tensor::concat(&[&parts[0]], 1).unwrap(), parts[0]);
        let a = t2(&[&[1.0], &[2.0]]);
        let b = t2(&[&[3.0], &[4.0]]);
        assert_eq!(Tensor::concat(&[&a, &b], 0).unwrap(), t2(&[&[1.0], &[2.0], &[3.0], &[4.0]]));
        assert!(Tensor::concat(&[&a, &Tensor::zeros(&[3, 2])], 0).is_err());
    }

    #[test]
    fn ewise_cases() {
        let a = Tensor::from_vec(alloc::vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(alloc::vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(a.add(&a.zeros_like()).unwrap(), a);
        let c = Tensor::from_vec(alloc::vec![2.0, 3.0]).unwrap();
        let d = Tensor::from_vec(alloc::vec![4.0, 5.0]).unwrap();
        assert_eq!(c.mul(&d).unwrap().data(), &[8.0, 15.0]);
        assert!(a.add(&Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn bias_broadcast_over_batch() {
        let x = Tensor::zeros(&[3, 2]);
        let b = Tensor::from_vec(alloc::vec![1.0, -1.0]).unwrap();
        assert_eq!(x.add_bias(&b).unwrap().data(), &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        assert!(x.add_bias(&Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(&[2, 2], alloc::vec![0.0; 3]).is_err());
        assert!(Tensor::new(&[0, 2], alloc::vec![]).is_err());
    }

    #[test]
    fn swap_last_axes_round_trip() {
        let x = Tensor::new(&[2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        let y = x.swap_last_axes().unwrap();
        assert_eq!(y.shape(), &[2, 4, 3]);
        assert_eq!(y.data()[(4 + 1) * 3 + 2], x.data()[(3 + 2) * 4 + 1]);
        assert_eq!(y.swap_last_axes().unwrap(), x);
    }
}
