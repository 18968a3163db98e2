pub mod approximator;
pub mod bnn;
pub mod error;
pub mod experiments;
pub mod gadgets;
pub mod grid;
pub mod net;
