pub mod report;
pub mod route;
pub mod sweep;
pub mod synth;
pub mod train;
