use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Storage precision tag, also the on-disk dtype code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Floating-point element type a tensor can hold.
pub trait Element:
    num_traits::Float
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + 'static
{
    const DTYPE: DType;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
    fn bits(self) -> u64;
}

impl Element for f32 {
    const DTYPE: DType = DType::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"))
    }
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Element for f64 {
    const DTYPE: DType = DType::F64;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// N-dimensional strided array over shared immutable storage.
///
/// Views (`permute`) share storage with their source; every operation that
/// needs flat data goes through [`Tensor::contiguous`].
#[derive(Clone)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    strides: Vec<usize>,
    offset: usize,
    storage: Arc<Vec<T>>,
}

impl<T: Element> Tensor<T> {
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::dim(
                "tensor",
                format!("shape {shape:?} has a zero extent"),
            ));
        }
        if numel(shape) != data.len() {
            return Err(Error::dim(
                "tensor",
                format!(
                    "shape {shape:?} needs {} elements, got {}",
                    numel(shape),
                    data.len()
                ),
            ));
        }
        Ok(Self::from_parts(shape.to_vec(), data))
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            strides: row_major_strides(&shape),
            shape,
            offset: 0,
            storage: Arc::new(data),
        }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::from_vec(shape, data.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::from_parts(shape.to_vec(), vec![value; numel(shape)])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(vec![], vec![value])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.shape)
    }

    pub fn is_contiguous(&self) -> bool {
        self.offset == 0
            && self.storage.len() == self.numel()
            && self.strides == row_major_strides(&self.shape)
    }

    /// Flat row-major data. Only valid on contiguous tensors.
    pub fn data(&self) -> &[T] {
        assert!(
            self.is_contiguous(),
            "data() on a strided view; call contiguous() first"
        );
        &self.storage
    }

    /// Row-major copy if this is a view, otherwise a cheap clone.
    pub fn contiguous(&self) -> Tensor<T> {
        if self.is_contiguous() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.numel());
        self.for_each_offset(|off| out.push(self.storage[off]));
        Self::from_parts(self.shape.clone(), out)
    }

    fn for_each_offset(&self, mut f: impl FnMut(usize)) {
        let n = self.numel();
        if self.shape.is_empty() {
            f(self.offset);
            return;
        }
        let mut index = vec![0usize; self.shape.len()];
        let mut off = self.offset;
        for _ in 0..n {
            f(off);
            for axis in (0..self.shape.len()).rev() {
                index[axis] += 1;
                off += self.strides[axis];
                if index[axis] < self.shape[axis] {
                    break;
                }
                off -= self.strides[axis] * self.shape[axis];
                index[axis] = 0;
            }
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.contiguous().data().to_vec()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.to_vec().into_iter().map(Element::as_f64).collect()
    }

    /// Element at a multi-index.
    pub fn get(&self, index: &[usize]) -> Option<T> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, s)| i >= s) {
            return None;
        }
        let off = self.offset
            + index
                .iter()
                .zip(&self.strides)
                .map(|(i, s)| i * s)
                .sum::<usize>();
        Some(self.storage[off])
    }

    /// Single value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(
            self.numel(),
            1,
            "item() on a tensor of shape {:?}",
            self.shape
        );
        self.storage[self.offset]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.numel() || shape.contains(&0) {
            return Err(Error::dim(
                "reshape",
                format!("cannot reshape {:?} into {:?}", self.shape, shape),
            ));
        }
        let c = self.contiguous();
        Ok(Tensor {
            strides: row_major_strides(shape),
            shape: shape.to_vec(),
            offset: 0,
            storage: c.storage,
        })
    }

    /// Strided view with axes reordered: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor<T>> {
        let mut seen = vec![false; self.ndim()];
        if axes.len() != self.ndim() {
            return Err(Error::dim(
                "permute",
                format!("axes {axes:?} do not match rank of {:?}", self.shape),
            ));
        }
        for &a in axes {
            if a >= self.ndim() || seen[a] {
                return Err(Error::dim("permute", format!("invalid axes {axes:?}")));
            }
            seen[a] = true;
        }
        Ok(Tensor {
            shape: axes.iter().map(|&a| self.shape[a]).collect(),
            strides: axes.iter().map(|&a| self.strides[a]).collect(),
            offset: self.offset,
            storage: Arc::clone(&self.storage),
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        let c = self.contiguous();
        Self::from_parts(self.shape.clone(), c.data().iter().map(|&v| f(v)).collect())
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        let c = self.contiguous();
        Tensor::from_parts(
            self.shape.clone(),
            c.data().iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.contiguous().data().iter().all(|v| v.is_finite())
    }

    /// Same shape and identical bit patterns.
    pub fn bit_eq(&self, other: &Tensor<T>) -> bool {
        self.shape == other.shape
            && self
                .contiguous()
                .data()
                .iter()
                .zip(other.contiguous().data())
                .all(|(a, b)| a.bits() == b.bits())
    }

    /// Largest absolute elementwise difference; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Option<f64> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.contiguous()
                .data()
                .iter()
                .zip(other.contiguous().data())
                .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
                .fold(0.0, f64::max),
        )
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?} ", self.shape)?;
        let n: usize = self.shape.iter().product();
        if n <= 16 && self.storage.len() == n {
            write!(f, "{:?}", self.storage)
        } else {
            write!(f, "[.. {n} values]")
        }
    }
}
