//! Worst-case analysis engine for first-order optimization methods.
//!
//! Symbolically assembles performance-estimation problems over a Gram basis,
//! solves the resulting semidefinite programs with an interior-point method,
//! and extracts machine-checkable dual certificates.

pub mod builder;
pub mod certificate;
pub mod classes;
pub mod expr;
pub mod lyapunov;
pub mod methods;
pub mod quadratic;
pub mod rat;
pub mod sdp;
