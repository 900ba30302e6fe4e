//! Kinetic transport with a fat-tailed equilibrium on bounded, possibly
//! nonconvex domains, and its fractional-diffusion limit: a nonlocal operator
//! restricted to the star-shaped visible set S_Ω(x) plus a killing rate h_α.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the f64 instantiation used by the CLI and the
//! acceptance suite.

pub mod density;
pub mod equilibrium;
pub mod experiment;
pub mod geometry;
pub mod grid_solver;
pub mod jump_mc;
pub mod kinetic_mc;
pub mod nonlocal_op;
pub mod quadrature;
pub mod scalar;
pub mod stats;
pub mod test_function;

pub use scalar::Scalar;

pub type Point = geometry::Vec2<f64>;
pub type Domain = geometry::DomainSpec<f64>;
pub type Equilibrium = equilibrium::Equilibrium<f64>;
pub type TestFunction = test_function::TestFunction<f64>;
