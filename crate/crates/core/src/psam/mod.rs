//! The parallel single access machine: instruction set, interpreter,
//! assembler and demo programs.

pub mod asm;
pub mod demos;
pub mod isa;
pub mod synth;
pub mod vm;

pub use isa::{Expr, Instr, Program, Reg, Transform, PC};
pub use vm::{check_clean, priority_compare, psam_run, Crash, Limits, Machine, Outcome, PsamError, Run, Trace};
