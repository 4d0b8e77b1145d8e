#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting comparisons are deliberate.

pub mod bessel;
pub mod heun;
pub mod io;
pub mod matprod;
pub mod ode;
pub mod roots;
pub mod spectral;
pub mod torus;
pub mod validation;
