pub mod admm;
pub mod error;
pub mod kernels;
pub mod ladmm;
pub mod model;
pub mod solver;
pub mod baselines;
pub mod selection;
pub mod sim;
pub mod cli;
pub mod io;
