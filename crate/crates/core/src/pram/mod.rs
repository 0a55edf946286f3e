//! A CRCW PRAM with a pluggable conflict operator, and its simulation on
//! the PSAM.

pub mod check;
pub mod compile;
pub mod demos;
pub mod machine;
pub mod tree;

pub use check::{check_compiled, CheckError, CheckReport, StepRecord};
pub use compile::{compile_pram_to_psam, CompileError, CompileOptions, CompiledPram};
pub use machine::{pram_run, PramAsm, PramError, PramInstr, PramLimits, PramMachine, PramProgram, PramRun, StarOp};
pub use tree::{decode_tree, SimFormat, TreeImage, TreeNode};
