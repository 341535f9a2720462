//! Dense-tensor numerical core with reverse-mode tape autodiff and Adam.
//!
//! Everything is generic over the scalar type: training runs in `f32`,
//! gradient verification against finite differences runs in `f64`.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod kernels;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use error::NdError;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

/// Scalar type the tensor core is generic over: `f32` for training,
/// `f64` for the finite-difference verification mode.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64c(v: f64) -> Self {
        num_traits::NumCast::from(v).expect("scalar conversion")
    }
    fn to_f64c(self) -> f64 {
        num_traits::NumCast::from(self).expect("scalar conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
