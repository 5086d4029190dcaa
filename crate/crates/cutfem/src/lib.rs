//! Cut finite element solver for a coupled bulk-surface elliptic problem.
//!
//! A fixed structured tetrahedral background mesh is cut by an implicitly
//! given surface (the zero set of a nodal piecewise-linear level set).
//! Continuous piecewise-linear spaces on the cut element sets discretize a
//! bulk diffusion equation coupled through a Robin-type flux condition to a
//! surface diffusion equation on the discrete surface. Gradient-jump ghost
//! penalties on the faces near the cut keep the (diagonally rescaled)
//! stiffness matrix as well conditioned as a fitted method, independent of
//! how the surface intersects the mesh. The surface quotient by constants
//! is enforced through a scalar Lagrange multiplier.
//!
//! The [`study`] module drives manufactured-solution refinement sweeps that
//! reproduce second-order L2 / first-order H1 convergence and the h^-2
//! condition number scaling, and writes CSV/VTK artifacts.

pub mod analysis;
pub mod assembly;
pub mod cut;
pub mod error;
pub mod level_set;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod study;
pub mod vtk;

pub use error::{CutFemError, Result};
