//! Coarse-to-fine optimization of dynamic fling parameters.
//!
//! A Thompson-sampling bandit picks a cell of a coarse grid over the fling
//! parameters, then a cross-entropy search refines the action inside that
//! cell. Expected-improvement rules decide when training and execution stop.
//! Priors learned on earlier garments can seed the bandit for a new garment.
//! A synthetic coverage simulator stands in for the robot.

pub mod bandit;
pub mod baselines;
pub mod belief;
pub mod cem;
pub mod error;
pub mod exec_stop;
pub mod harness;
pub mod param_space;
pub mod seed;
pub mod sim_env;
pub mod trajectory;
pub mod trial;

pub use error::{Error, Result};
pub use param_space::{ActionGrid, FlingParams, ParamBounds};
