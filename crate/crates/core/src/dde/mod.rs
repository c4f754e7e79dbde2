//! Benchmark delay differential equations and a fixed-step method-of-steps
//! integrator with dense output.

mod history;
mod integrate;
mod system;

pub(crate) use history::uniform_node;
pub use history::{HistorySegment, Interpolation};
pub use integrate::{integrate, sample_initial_histories, Trajectory};
pub use system::{hill_system, hill_system_with_delay, tumor_system, tumor_system_with_delay, DdeSystem};
