pub mod diagnose;
pub mod gen;
pub mod probe;
pub mod sweep;
pub mod train;
