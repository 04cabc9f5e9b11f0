//! Size-structured consumer-resource population dynamics.
//!
//! A consumer population structured by individual size `x >= x_b` feeds on an
//! unstructured resource with concentration `S`. Individual behaviour is
//! described by five rate functions: growth `g(x,S)`, mortality `mu(x,S)`,
//! reproduction `beta(x,S)`, consumption `gamma(x,S)` and the autonomous
//! resource dynamics `f(S)`. The population can be tracked in two equivalent
//! ways:
//!
//! * the **density formulation** ([`pde_engine`]): a size density `n(t,x)`
//!   coupled to the scalar resource, advanced by integrating along growth
//!   characteristics and solving a renewal (Volterra) equation for the
//!   population birth rate;
//! * the **delay formulation** ([`delay_engine`]): histories of the birth
//!   rate `b` and the resource `S`, extended forward in time and shifted.
//!
//! The [`intertwine`] module converts states between the two formulations,
//! [`equilibrium`] computes positive steady states in closed form, and
//! [`spectral`] assembles the characteristic equation at a steady state and
//! locates its roots to decide linearised stability.
//!
//! Shared numerical kernels (fixed-step RK4, composite quadrature, a Volterra
//! second-kind marcher, Brent root finding and an argument-principle complex
//! root counter) live in [`numerics`]; model definitions and hypothesis
//! checking in [`ingredients`].

pub mod characteristics;
pub mod delay_engine;
pub mod equilibrium;
pub mod ingredients;
pub mod intertwine;
pub mod numerics;
pub mod pde_engine;
pub mod spectral;

pub use characteristics::EnvironmentTrajectory;
pub use ingredients::{ModelIngredients, WeightPair};
pub use numerics::{Grid1D, ToleranceSet};
pub use pde_engine::DensityState;
