//! Core algorithms for voxel-based homogenization of particle-reinforced
//! composites and for the 3D convolutional surrogate that learns it.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. Everything here is pure computation: IO, file formats and
//! orchestration live in the `voxhomog` companion crate.
//!
//! Module map:
//!
//! * [`microgeom`]: random sequential adsorption of spherical and ellipsoidal
//!   inclusions into a cube, plus the VF-stratified sample schedule.
//! * [`voxel`]: level-set voxelization into a binary [`voxel::PhaseGrid`].
//! * [`homog`]: periodic voxel finite elements, effective stiffness and
//!   engineering constants, Voigt/Reuss bounds.
//! * [`nn`]: conv3d / max-pool / fully connected layers with exact
//!   backpropagation, Adam, label scaling and the training loop.
//! * [`stats`]: MARE, Gaussian fits, histograms and split assignment.

#![cfg_attr(not(feature = "std"), no_std)]
// Index loops mirror the tensor notation; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::single_range_in_vec_init)]

extern crate alloc;

pub mod error;
pub mod homog;
pub(crate) mod math;
pub mod microgeom;
pub mod nn;
pub mod seed;
pub mod stats;
pub mod voxel;

pub use error::{Error, Result};
