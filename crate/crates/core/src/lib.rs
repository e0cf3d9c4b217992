//! Universal multiple-description lossy coding of discrete sequences.
//!
//! The encoder searches for a reconstruction triple `(x̂1, x̂2, x̂0)` that
//! minimises a Lagrangian of empirical conditional entropies and average
//! distortions, using simulated annealing with a Gibbs sampler. The triple is
//! then described losslessly: `x̂1` and `x̂2` by adaptive context coders, and
//! `x̂0` by a coder conditioned on both side reconstructions whose bits are
//! split between the two messages.

pub mod anneal;
pub mod codec;
pub mod energy;
pub mod experiment;
pub mod pipeline;
pub mod source;
pub mod stats;

pub use anneal::{anneal, exhaustive_minimize, AnnealReport, AnnealSchedule};
pub use energy::{AnnealState, DistortionMeasure, EnergyBreakdown, LagrangianWeights};
pub use stats::{CountMatrix, JointCountMatrix, Role, Sequence};
