//! Convex network flows with fixed fees.
//!
//! * [`sets`]: allowable flow sets through membership, support and gauge oracles.
//! * [`calculus`]: scaling, nonnegative matrix images, lifting, set addition,
//!   intersection and aggregate edges.
//! * [`conic`]: flow cones, clipped cones and the conic form of an instance.
//! * [`model`]: instances, utilities and their conjugates, documents, and the
//!   dual view.
//! * [`solver`]: dual decomposition with a projected L-BFGS method, primal
//!   recovery and optimality certificates.
//! * [`fees`]: rounding into the fixed-fee constraint sets, gap bounds and a
//!   brute-force oracle.
//! * [`bench`]: benchmark generators and the sweep harness.

pub mod bench;
pub mod calculus;
pub mod conic;
pub mod error;
pub mod fees;
pub mod model;
pub mod par;
pub mod rng;
pub mod sets;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Edge, Instance, Utility};
pub use par::Exec;
pub use sets::{FlowSet, SetRef, Support};
pub use solver::{solve, SolveOptions, SolveReport};
