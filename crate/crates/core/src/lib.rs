//! Analytic and simulation toolkit for the random delay of a two-stage
//! offloading pipeline: D-MAP arrivals feed a finite transmission buffer,
//! transmitted tasks land in a finite computation buffer, and the
//! transmitter takes phase-type vacations whenever the computation buffer
//! is full. The crate computes the delay distribution, bound-violation
//! probabilities, mean and standard deviation both by matrix-analytic
//! methods and by a slot-accurate simulator.

pub mod error;
pub mod linalg;
pub mod stochastic;
pub mod layout;
pub mod model;
pub mod kernel;
pub mod stationary;
pub mod delay;

pub use delay::{CpdOptions, DelayCharacteristics, TruncationInfo};
pub use error::{Error, Result};
pub use kernel::{KernelVariant, LevelKernel};
pub use layout::{Phase, PhaseLayout};
pub use model::Model;
pub use stationary::{RMatrix, SolveMethod, SolverOptions, StationaryDistribution};
pub use stochastic::{multi_access_rate, AccessMode, DMap, DPh};
