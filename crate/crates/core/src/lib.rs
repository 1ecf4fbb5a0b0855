//! # hls-core
//!
//! Numerics for Hardy–Littlewood–Sobolev inequalities on compact manifolds.
//!
//! The Riesz potential `I_α f(x) = ∫ f(y) d(x,y)^{α−n} dV_y` is discretized
//! on quadrature grids of a small catalog of manifolds (circle, round
//! 2-sphere, flat tori, Euclidean balls). On top of it the crate provides:
//!
//! * [`extremal`]: sharp constants `N = sup ⟨f, I_α g⟩` over `‖f‖_p = ‖g‖_t = 1`
//!   by alternating sharp-Hölder maximization, Euler–Lagrange residuals and
//!   the Euclidean-ball baseline;
//! * [`transplant`]: scaled Euclidean extremizers pushed through a normal
//!   chart, with the correction terms and the resulting lower-bound
//!   certificate for the manifold constant;
//! * [`diagnostics`]: concentration measures, atom detection, Brezis–Lieb
//!   defects, cutoff commutators and the near/far kernel split check;
//! * [`runner`]: the `key = value` job config and the workflows behind the
//!   `hls` binary.
//!
//! ## Exponents
//!
//! For `0 < α < n` and `1 < p < n/α`, `1/q = 1/p − α/n` and `t = q/(q−1)`;
//! see [`riesz::critical_exponent`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod diagnostics;
pub mod error;
pub mod extremal;
pub mod grid;
pub mod manifold;
pub mod riesz;
pub mod runner;
pub mod transplant;

pub use chart::{metric_distortion, NormalChart};
pub use error::{HlsError, Result};
pub use extremal::{
    alternating_maximize, dual_element, el_residual, euclidean_baseline, scaling_family, ExtremalResult, SolverConfig,
};
pub use grid::{build_grid, QuadratureGrid};
pub use manifold::{ManifoldKind, ManifoldSpec, Point};
pub use riesz::{critical_exponent, lp_norm, DensityField, Exponents, KernelMatrix, RieszKernel};
