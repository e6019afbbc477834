//! Per-subcarrier channel tensors, stored as `(subcarrier, antenna, position)`.

use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

macro_rules! channel_tensor {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Array3<Complex64>);

        impl $name {
            /// Wraps an array of shape `(num_subcarriers, L, D)`.
            pub fn from_array(data: Array3<Complex64>) -> Self {
                $name(data)
            }

            /// Stacks per-subcarrier `L x D` matrices.
            pub fn from_subcarriers(matrices: &[Array2<Complex64>]) -> Result<Self> {
                let first = matrices.first().ok_or_else(|| {
                    Error::invalid(stringify!($name), "at least one subcarrier is required")
                })?;
                let views: Vec<_> = matrices.iter().map(|m| m.view()).collect();
                if let Some(bad) = matrices.iter().find(|m| m.dim() != first.dim()) {
                    return Err(Error::shape(
                        stringify!($name),
                        format!("{:?}", first.dim()),
                        format!("{:?}", bad.dim()),
                    ));
                }
                let data = ndarray::stack(Axis(0), &views).expect("shapes checked");
                Ok($name(data))
            }

            /// `(num_subcarriers, L, D)`.
            pub fn dims(&self) -> (usize, usize, usize) {
                self.0.dim()
            }

            pub fn num_subcarriers(&self) -> usize {
                self.0.dim().0
            }

            pub fn num_antennas(&self) -> usize {
                self.0.dim().1
            }

            pub fn num_positions(&self) -> usize {
                self.0.dim().2
            }

            /// The `L x D` matrix of subcarrier `n`. Panics if `n` is out of range.
            pub fn subcarrier(&self, n: usize) -> ArrayView2<'_, Complex64> {
                self.0.index_axis(Axis(0), n)
            }

            pub fn subcarrier_mut(&mut self, n: usize) -> ArrayViewMut2<'_, Complex64> {
                self.0.index_axis_mut(Axis(0), n)
            }

            pub fn as_array(&self) -> &Array3<Complex64> {
                &self.0
            }

            pub fn as_array_mut(&mut self) -> &mut Array3<Complex64> {
                &mut self.0
            }

            pub fn into_array(self) -> Array3<Complex64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            }
        }
    };
}

channel_tensor!(
    /// Measured channel coefficients `R[n]`.
    MeasurementTensor
);

channel_tensor!(
    /// Geometry-derived line-of-sight coefficients `A[n]`.
    IdealTensor
);

impl MeasurementTensor {
    pub fn check_matches(&self, ideal: &IdealTensor) -> Result<()> {
        if self.dims() != ideal.dims() {
            return Err(Error::shape(
                "measurement vs ideal tensor",
                format!("{:?}", ideal.dims()),
                format!("{:?}", self.dims()),
            ));
        }
        Ok(())
    }
}
