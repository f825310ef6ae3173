pub mod blicket;
pub mod datasets;
pub mod engine;
pub mod harness;
pub mod interpreter;
pub mod model;
pub mod proposer;
pub mod qcfg;
pub mod sandbox;
