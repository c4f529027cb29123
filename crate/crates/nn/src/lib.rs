//! Minimal f64 reverse-mode autodiff used by the neural pieces of this
//! workspace: a tape graph with eagerly evaluated ops, exact analytic
//! backward rules, a couple of layer helpers, and Adam.
//!
//! Built for small models where determinism and gradient fidelity matter
//! more than raw throughput: everything is plain f64, every source of
//! randomness takes an explicit seeded RNG, and gradients are checked
//! against central finite differences in the test suite.

pub mod adam;
pub mod graph;
pub mod init;
pub mod layers;
pub mod tensor;

pub use adam::Adam;
pub use graph::{Gradients, Graph, VarId};
pub use layers::{sinusoidal_positions, Linear, Mlp};
pub use tensor::{Param, Tensor};
