//! Lockstep checker: runs a compiled program next to the reference PRAM and,
//! each time the driver reaches its loop head, decodes both trees and
//! compares them with the reference state.

use std::collections::BTreeMap;

use crate::psam::isa::mask;
use crate::psam::{Crash, Limits, Machine, PsamError};

use super::compile::CompiledPram;
use super::machine::{PramError, PramLimits, PramMachine, PramProgram};
use super::tree::decode_tree;

/// Cost of one simulated PRAM step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub pram_step: u64,
    /// Active PRAM processors in this step.
    pub procs: usize,
    pub psam_time: u64,
    pub psam_work: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Psam(#[from] PsamError),
    #[error("PSAM crashed: {0:?}")]
    Crash(Crash),
    #[error(transparent)]
    Pram(#[from] PramError),
    #[error("PSAM program halted before PRAM step {0}")]
    EarlyHalt(u64),
    #[error("after PRAM step {step}: {msg}")]
    Invariant { step: u64, msg: String },
    #[error("outputs differ: PRAM {pram:?}, PSAM {psam:?}")]
    Output { pram: Vec<u64>, psam: Vec<u64> },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub steps: Vec<StepRecord>,
    /// Steps where simultaneous Inputs got their words in a different order
    /// than the reference's priority order.
    pub tape_reorders: u64,
}

/// Runs both machines, checking the tree invariant after every PRAM step
/// (up to `max_steps` of them). When the PRAM halts within the budget the
/// PSAM run is finished and the outputs compared as well.
///
/// The simulation serves simultaneous Inputs in tree order rather than
/// priority order; when that is the only difference the reference adopts
/// the simulation's assignment and the step is counted in `tape_reorders`.
pub fn check_compiled(
    c: &CompiledPram,
    pram: &PramProgram,
    input: &[u64],
    max_steps: Option<u64>,
    limits: Limits,
) -> Result<CheckReport, CheckError> {
    let f = c.format;
    let mut m = Machine::new(&c.program, input, limits)?;
    let mut r = PramMachine::new(pram, input, c.star, PramLimits::default())?;
    let mut report = CheckReport::default();
    let mut mark = (0u64, 0u64);
    let mut t = 0u64;
    loop {
        let regs = loop {
            if let Some(crash) = m.crash() {
                return Err(CheckError::Crash(crash.clone()));
            }
            if m.is_done() {
                return Err(CheckError::EarlyHalt(t));
            }
            let root = &m.processes()[0];
            if root.ret_to.is_none() && root.regs[0].value() == Some(c.loop_pc) {
                break root.regs.clone();
            }
            m.step()?;
        };
        if t > 0 {
            let trace = m.trace();
            report.steps.push(StepRecord {
                pram_step: t - 1,
                procs: r.stats().active[t as usize - 1],
                psam_time: trace.time - mark.0,
                psam_work: trace.work - mark.1,
            });
        }
        mark = (m.trace().time, m.trace().work);
        let bad = |msg: String| CheckError::Invariant { step: t, msg };
        let handle = |reg| m.settle(&regs[reg as usize]).ok_or_else(|| bad("root handle unsettled".into()));
        let mem = decode_tree(&m, &f, handle(c.mem_reg())?).map_err(|e| bad(format!("memory tree: {e}")))?;
        let procs = decode_tree(&m, &f, handle(c.proc_reg())?).map_err(|e| bad(format!("processor tree: {e}")))?;

        let cells = mem.leaves(f.mem_bits).map_err(|e| bad(format!("memory tree: {e}")))?;
        let mut got: BTreeMap<u64, u64> = BTreeMap::new();
        for (addr, payload) in cells {
            if payload >> (f.wp + 1) != 0 {
                return Err(bad(format!("memory leaf {addr} has stray bits {payload:#x}")));
            }
            got.insert(addr, payload & mask(f.wp));
        }
        let want = r.memory();
        for addr in got.keys().chain(want.keys()) {
            let (g, w) = (got.get(addr).copied().unwrap_or(0), want.get(addr).copied().unwrap_or(0));
            if g != w {
                return Err(bad(format!("address {addr} holds {g}, reference {w}")));
            }
        }

        let leaves = procs.leaves(f.depth()).map_err(|e| bad(format!("processor tree: {e}")))?;
        let mut states = Vec::with_capacity(leaves.len());
        for (path, payload) in leaves {
            let (pid, regs) = f.unpack_proc(payload);
            let addr = pram.next_address(&regs) & mask(f.mem_bits);
            if path != addr << f.pid_bits | pid {
                return Err(bad(format!("processor {pid} at path {path:#x}, expected address {addr}")));
            }
            states.push((pid, regs));
        }
        states.sort();
        let mut expect: Vec<(u64, Vec<u64>)> = r.processors().iter().map(|p| (p.pid, p.regs.clone())).collect();
        expect.sort();
        if states != expect {
            let reads: Vec<(u64, u64)> = r
                .last_inputs()
                .iter()
                .filter_map(|&(pid, x)| states.iter().find(|s| s.0 == pid).map(|s| (pid, s.1[x as usize])))
                .collect();
            if reads.len() < 2 || r.reassign_inputs(&reads).is_err() {
                return Err(bad(format!("processors {states:?}, reference {expect:?}")));
            }
            let mut fixed: Vec<(u64, Vec<u64>)> = r.processors().iter().map(|p| (p.pid, p.regs.clone())).collect();
            fixed.sort();
            if states != fixed {
                return Err(bad(format!("processors {states:?}, reference {fixed:?}")));
            }
            report.tape_reorders += 1;
        }

        if r.is_done() {
            let pram_out = r.output().to_vec();
            let run = m.run()?;
            return match run.output() {
                Some(out) if out == pram_out => Ok(report),
                Some(out) => Err(CheckError::Output {
                    pram: pram_out,
                    psam: out.to_vec(),
                }),
                None => match run.outcome {
                    crate::psam::Outcome::Crashed(c) => Err(CheckError::Crash(c)),
                    _ => unreachable!(),
                },
            };
        }
        if max_steps.is_some_and(|n| t >= n) {
            return Ok(report);
        }
        r.step()?;
        t += 1;
        m.step()?;
    }
}
