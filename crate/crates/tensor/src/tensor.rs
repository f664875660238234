//! Dense row-major tensors.

use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::Result;

/// A dense tensor: a shape (list of positive extents) plus a row-major
/// (last axis fastest) flat buffer whose length equals the shape product.
///
/// Fields are private so the length/shape invariant cannot be broken;
/// `data_mut` hands out the buffer as a slice, which can change values but
/// never the element count.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    /// Builds a tensor, validating that every extent is positive and the
    /// buffer length matches the shape product.
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) {
            return Err(TensorError::InvalidShape {
                op: "Tensor::new",
                shape,
                msg: "extents must be positive".into(),
            });
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::InvalidShape {
                op: "Tensor::new",
                shape,
                msg: format!("shape product {} != buffer length {}", numel, data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); numel],
        }
    }

    /// Tensor of the given shape with every element equal to `value`.
    pub fn full(shape: &[usize], value: F) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(value: F) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    /// Rank-1 tensor over the whole vector.
    pub fn from_vec(data: Vec<F>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Identity matrix of size `n`.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = F::one();
        }
        t
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Consumes the tensor, returning its flat buffer.
    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// The single element of a rank-0 or one-element tensor.
    pub fn item(&self) -> Result<F> {
        if self.data.len() != 1 {
            return Err(TensorError::InvalidShape {
                op: "Tensor::item",
                shape: self.shape.clone(),
                msg: "expected exactly one element".into(),
            });
        }
        Ok(self.data[0])
    }

    /// Same buffer under a new shape with identical element count.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() || shape.iter().any(|&e| e == 0) {
            return Err(TensorError::InvalidShape {
                op: "Tensor::reshaped",
                shape,
                msg: format!("incompatible with {} elements", self.data.len()),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Element-wise conversion to another scalar type (used when moving
    /// checkpoints between precisions is explicitly requested).
    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| G::from_f64(x.as_f64())).collect(),
        }
    }

    /// Row-major strides for this shape.
    pub fn strides(&self) -> Vec<usize> {
        strides_for(&self.shape)
    }

    /// Maximum absolute difference to another tensor of identical shape.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "Tensor::max_abs_diff",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max))
    }
}

/// Row-major strides for a shape (empty shape gives empty strides).
pub fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; shape.len()];
    let mut acc = 1usize;
    for i in (0..shape.len()).rev() {
        strides[i] = acc;
        acc *= shape[i];
    }
    strides
}

/// Checks that `rhs` is a broadcastable suffix of `lhs`: rhs.shape must equal
/// the trailing axes of lhs.shape. Returns the number of leading rows the
/// rhs is repeated over.
pub fn suffix_repeat(lhs: &[usize], rhs: &[usize]) -> Option<usize> {
    if rhs.len() > lhs.len() {
        return None;
    }
    let split = lhs.len() - rhs.len();
    if &lhs[split..] != rhs {
        return None;
    }
    Some(lhs[..split].iter().product())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates_shape_product() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn strides_are_row_major() {
        assert_eq!(strides_for(&[2, 3, 4]), vec![12, 4, 1]);
        assert_eq!(strides_for(&[5]), vec![1]);
        assert_eq!(strides_for(&[]), Vec::<usize>::new());
    }

    #[test]
    fn suffix_repeat_matches_trailing_axes() {
        assert_eq!(suffix_repeat(&[4, 2, 3], &[2, 3]), Some(4));
        assert_eq!(suffix_repeat(&[4, 2, 3], &[3]), Some(8));
        assert_eq!(suffix_repeat(&[4, 2, 3], &[4, 2, 3]), Some(1));
        assert_eq!(suffix_repeat(&[4, 2, 3], &[2, 4]), None);
        assert_eq!(suffix_repeat(&[3], &[2, 3]), None);
    }
}
