//! Cyclic Boolean circuits and the machinery built on them.

pub mod bench;
pub mod circuit;
pub mod cli;
pub mod gadgets;
pub mod routing;
pub mod psam;
pub mod pram;
