//! Certified reduced-basis approximation of affine-parametrized linear
//! systems.
//!
//! The crate covers the offline/online reduced-basis pipeline (POD bases,
//! Galerkin projection, adjoint-corrected outputs) together with four output
//! error bounds: the Lipschitz bound, the dual-based bound, and the
//! goal-oriented probabilistic bound on the plain and corrected outputs. The
//! bounds feed a certified pick-freeze estimator of first-order Sobol
//! indices.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature maps
//! per-parameter full-order solves over a rayon pool; results do not depend
//! on the thread count. Enabling `std` (implied by `parallel`) switches the
//! float routines from `libm` to std, which can move the last bits.

#![no_std]
// `!(a < b)` also rejects NaN; banded kernels read best with index loops
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod benchmarks;
pub mod bounds;
pub mod error;
pub mod linalg;
pub mod model;
pub mod reduction;
pub mod sensitivity;

pub use error::{Error, Result};
pub use model::{AffineModel, Coefficient, FullSolution, ParameterBox, ParameterPoint, Partition};
pub use reduction::{pod_basis, ReducedBasis, ReducedModel, ReducedSolution};

use alloc::vec::Vec;

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
