pub mod ansatz;
pub mod baselines;
pub mod error;
pub mod flow;
pub mod hamiltonian;
pub mod simulator;
pub mod training;
