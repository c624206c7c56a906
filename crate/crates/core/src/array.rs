//! Dense row-major arrays, parameter buffers and the sliding-window kernels
//! the alignment layers are built on.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Array<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Array<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("shape {shape:?} has a zero extent")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Array {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a `rows × cols` matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_vec(&[rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Row `r` of a rank-2 array.
    pub fn row(&self, r: usize) -> &[T] {
        let cols = self.shape[1];
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let cols = self.shape[1];
        &mut self.data[r * cols..(r + 1) * cols]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> T {
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::invalid(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Sums along `axis`, dropping it from the shape.
    pub fn reduce_sum_axis(&self, axis: usize) -> Result<Self> {
        if axis >= self.rank() {
            return Err(Error::invalid(format!(
                "axis {axis} out of range for rank {}",
                self.rank()
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let n = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let src = &self.data[(o * n + k) * inner..(o * n + k + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Array { shape, data: out })
    }

    pub fn cast<U: Scalar>(&self) -> Array<U> {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::lit(x.as_f64())).collect(),
        }
    }
}

/// Trainable tensor with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBuffer<T> {
    pub value: Array<T>,
    pub grad: Array<T>,
    pub adam_m: Array<T>,
    pub adam_v: Array<T>,
}

impl<T: Scalar> ParamBuffer<T> {
    pub fn new(value: Array<T>) -> Self {
        let shape = value.shape().to_vec();
        ParamBuffer {
            value,
            grad: Array::zeros(&shape),
            adam_m: Array::zeros(&shape),
            adam_v: Array::zeros(&shape),
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Array::zeros(shape))
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn values(&self) -> &[T] {
        self.value.data()
    }

    /// Builds a new buffer whose slot `i` along axis 1 copies slot `map[i]`
    /// of `self` (value and moments), or is taken from `fresh` when `None`.
    /// Used when the set of input rows feeding a layer changes.
    pub fn remap_axis1(&self, map: &[Option<usize>], fresh: &Array<T>) -> Self {
        let shape = self.shape();
        assert_eq!(shape.len(), 3, "remap_axis1 expects a rank-3 buffer");
        let (outc, inner) = (shape[0], shape[2]);
        let old_in = shape[1];
        let new_in = map.len();
        assert_eq!(fresh.shape(), &[outc, new_in, inner]);
        let pick = |src: &Array<T>, fallback: Option<&Array<T>>| {
            let mut data = Vec::with_capacity(outc * new_in * inner);
            for o in 0..outc {
                for (i, m) in map.iter().enumerate() {
                    for k in 0..inner {
                        data.push(match m {
                            Some(j) => src.data()[(o * old_in + j) * inner + k],
                            None => fallback.map_or(T::zero(), |f| f.data()[(o * new_in + i) * inner + k]),
                        });
                    }
                }
            }
            Array {
                shape: vec![outc, new_in, inner],
                data,
            }
        };
        ParamBuffer {
            value: pick(&self.value, Some(fresh)),
            grad: Array::zeros(&[outc, new_in, inner]),
            adam_m: pick(&self.adam_m, None),
            adam_v: pick(&self.adam_v, None),
        }
    }
}

/// Padding policy for [`sliding_windows`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Only windows fully inside the signal.
    None,
    /// Replicate the first and last frame; one window per (strided) frame.
    Edge,
}

/// Number of frames a padded window of `width` reaches before its anchor
/// frame. Window `k` spans frames `k - left_reach(width) .. k - left_reach(width) + width`.
#[inline]
pub fn left_reach(width: usize) -> usize {
    (width - 1) / 2
}

/// Edge-replicates `x` so that window `k` is the contiguous slice
/// `padded[k..k + width]`.
pub fn pad_edges<T: Scalar>(x: &[T], width: usize) -> Vec<T> {
    let left = left_reach(width);
    let right = width - 1 - left;
    let first = x[0];
    let last = x[x.len() - 1];
    let mut out = Vec::with_capacity(x.len() + width - 1);
    out.extend(std::iter::repeat_n(first, left));
    out.extend_from_slice(x);
    out.extend(std::iter::repeat_n(last, right));
    out
}

/// Extracts windows of `width` frames with the given stride.
pub fn sliding_windows<T: Scalar>(
    x: &[T],
    width: usize,
    stride: usize,
    padding: Padding,
) -> Result<Vec<Vec<T>>> {
    if width == 0 || stride == 0 {
        return Err(Error::invalid("width and stride must be at least 1"));
    }
    if x.is_empty() {
        return Err(Error::invalid("cannot window an empty signal"));
    }
    match padding {
        Padding::None => {
            if width > x.len() {
                return Err(Error::invalid(format!(
                    "window width {width} exceeds signal length {} without padding",
                    x.len()
                )));
            }
            let count = (x.len() - width) / stride + 1;
            Ok((0..count)
                .map(|w| x[w * stride..w * stride + width].to_vec())
                .collect())
        }
        Padding::Edge => {
            let padded = pad_edges(x, width);
            Ok((0..x.len())
                .step_by(stride)
                .map(|k| padded[k..k + width].to_vec())
                .collect())
        }
    }
}
