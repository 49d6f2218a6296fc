//! 3D convolutional network engine.
//!
//! A network is a stack of stages: conv stages (valid 3D convolution with
//! stride 1, ReLU, optional non-overlapping 2^3 max-pool) followed by fully
//! connected stages. Volumes are channels-first with x fastest, matching
//! [`crate::voxel::PhaseGrid`]. All parameters live in one flat vector (see
//! [`arch::NetworkArch::param_layout`]), which is what Adam, checkpoints and
//! freezing operate on.
//!
//! The engine is generic over the scalar type: `f32` for training, `f64`
//! for gradient verification.

pub mod adam;
pub mod arch;
mod kernels;
pub mod layers;
pub mod loss;
pub mod network;
pub mod scaling;
pub mod train;
pub mod transfer;

pub use adam::{AdamConfig, AdamState};
pub use arch::{Activation, ConvSpec, FcSpec, NetworkArch, Pooling, Preset, ShapeTrace};
pub use loss::mse_loss;
pub use network::{Checkpoint, Network};
pub use scaling::LabelScaler;
pub use train::{train, EpochRecord, TrainConfig, TrainLog, TrainOutcome};
pub use transfer::{extend_for_transfer, TrainableScope, TransferSpec};

/// Number of predicted engineering constants.
pub const OUTPUT_DIM: usize = 12;

/// Floating-point type the engine runs in.
pub trait Scalar:
    num_traits::Float + Default + Send + Sync + core::fmt::Debug + core::iter::Sum + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
