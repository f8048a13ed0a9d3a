//! Simulation laboratory for random dynamical systems on the 2-torus.
//!
//! The crate transports stationary measures along frozen noise pasts, builds
//! Lyapunov-adapted chart frames, iterates graph transforms to produce local
//! unstable manifolds and stacks of pushed-forward leaves, and checks the
//! resulting sample measures for absolutely continuous conditional densities
//! and the entropy identity.

pub mod cocycle;
pub mod error;
pub mod graphs;
pub mod io;
pub mod noise;
pub(crate) mod parallel;
pub mod srb;
pub mod stacks;
pub mod systems;
pub mod tangent;
pub mod torus;
pub mod transform;
pub mod transport;

pub use error::{SrbError, SwitchError, TangentError, TransformError, TransportError};
pub use noise::{NoiseLaw, NoisePath, NoiseValue};
pub use systems::{MapFamily, System};
pub use torus::{Mat2, TorusPoint, Vec2};
