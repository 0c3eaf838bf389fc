//! Optimal jamming energy allocation against training-based multiple access
//! channels.
//!
//! A jammer with average power `P_w` splits its block energy between the
//! pilot window of each user and the shared data phase. Jamming pilots
//! degrades the receiver's LMMSE channel estimates; jamming data raises the
//! noise floor. [`optimizer::solve`] finds the split that minimizes the
//! closed-form bounds on the users' ergodic sum-rate, and [`rates`] evaluates
//! the bounds and a Monte Carlo estimate of the rate itself.

pub mod cli;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod rates;
pub mod scenario;

pub use error::{ModelError, ScenarioError, SolveError};
pub use model::{
    EstimationQuality, JammerAllocation, JammerBudget, PhaseJamPowers, SystemConfig, UserParams,
};
pub use optimizer::{solve, Method, SolveResult};
pub use rates::{MonteCarloSettings, RateReport};
pub use scenario::{load_scenario, uniform_allocation, ScenarioSpec};
