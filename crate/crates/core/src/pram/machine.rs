//! Reference CRCW word-PRAM interpreter.

use std::collections::{BTreeMap, HashMap};

use crate::psam::isa::{mask, Expr, Reg, Transform, PC};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PramInstr {
    Update(Transform),
    /// `y ← read x`
    Read { x: Reg, y: Reg },
    /// `write x y`: word `y` to address `x`.
    Write { x: Reg, y: Reg },
    Input { x: Reg },
    Output { x: Reg },
    /// Activates a processor with state `f(x)`; `f` sets the child's PC.
    Fork(Transform),
    Die,
}

impl PramInstr {
    pub fn name(&self) -> &'static str {
        match self {
            PramInstr::Update(_) => "update",
            PramInstr::Read { .. } => "read",
            PramInstr::Write { .. } => "write",
            PramInstr::Input { .. } => "input",
            PramInstr::Output { .. } => "output",
            PramInstr::Fork(_) => "fork",
            PramInstr::Die => "die",
        }
    }

    /// Register holding the memory address this instruction touches.
    pub fn address_reg(&self) -> Option<Reg> {
        match self {
            PramInstr::Read { x, .. } | PramInstr::Write { x, .. } => Some(*x),
            _ => None,
        }
    }
}

/// `k` registers of `w` bits (register 0 is the PC) and `addr_bits`-bit
/// addresses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PramProgram {
    pub instrs: Vec<PramInstr>,
    pub k: usize,
    pub w: u32,
    pub addr_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PramError {
    #[error("instruction {index}: {msg}")]
    Program { index: usize, msg: String },
    #[error("step {step}: address {addr} outside the {bits}-bit address space")]
    AddressBound { addr: u64, bits: u32, step: u64 },
    #[error("step {step}: program counter {pc} is past the end of the program")]
    InvalidPc { pc: u64, step: u64 },
    #[error("time limit of {0} steps exceeded")]
    TimeLimit(u64),
    #[error("work limit of {0} exceeded")]
    WorkLimit(u64),
}

impl PramProgram {
    pub fn validate(&self) -> Result<(), PramError> {
        let err = |index, msg: String| PramError::Program { index, msg };
        if self.k < 2 || !(1..=32).contains(&self.w) || self.addr_bits > self.w {
            return Err(err(0, format!("bad shape: k={} w={} addr_bits={}", self.k, self.w, self.addr_bits)));
        }
        // Transforms share the PSAM validity rules.
        for (i, ins) in self.instrs.iter().enumerate() {
            let t = match ins {
                PramInstr::Update(t) | PramInstr::Fork(t) => t,
                PramInstr::Read { x, y } | PramInstr::Write { x, y } => {
                    if *x as usize >= self.k || *y as usize >= self.k {
                        return Err(err(i, "register out of range".into()));
                    }
                    continue;
                }
                PramInstr::Input { x } | PramInstr::Output { x } => {
                    if *x as usize >= self.k {
                        return Err(err(i, "register out of range".into()));
                    }
                    continue;
                }
                PramInstr::Die => continue,
            };
            let probe = crate::psam::isa::Program {
                instrs: vec![crate::psam::isa::Instr::Update(t.clone())],
                k: self.k,
                w: self.w.max(2),
                addr_bits: 0,
            };
            probe.validate().map_err(|e| err(i, e.msg))?;
            if matches!(ins, PramInstr::Fork(_)) && !t.sets_pc() {
                return Err(err(i, "fork transform must set the child's PC".into()));
            }
        }
        Ok(())
    }

    /// Address the next instruction of a processor in state `regs` will
    /// touch; 0 for instructions that touch none.
    pub fn next_address(&self, regs: &[u64]) -> u64 {
        self.instrs
            .get(regs[PC as usize] as usize)
            .and_then(PramInstr::address_reg)
            .map_or(0, |x| regs[x as usize])
    }
}

/// Conflict operator for simultaneous writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StarOp {
    Add,
    Max,
    Min,
    Or,
    Xor,
    /// Keeps the highest-priority value.
    First,
    /// Keeps the lowest-priority value.
    Last,
}

impl StarOp {
    pub const ALL: [StarOp; 7] = [
        StarOp::Add,
        StarOp::Max,
        StarOp::Min,
        StarOp::Or,
        StarOp::Xor,
        StarOp::First,
        StarOp::Last,
    ];

    pub fn apply(self, a: u64, b: u64, w: u32) -> u64 {
        let v = match self {
            StarOp::Add => a.wrapping_add(b),
            StarOp::Max => a.max(b),
            StarOp::Min => a.min(b),
            StarOp::Or => a | b,
            StarOp::Xor => a ^ b,
            StarOp::First => a,
            StarOp::Last => b,
        };
        v & mask(w)
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, StarOp::First | StarOp::Last)
    }

    /// `(written, word)` pairs: writes beat readbacks, readbacks keep the
    /// first value, writes combine with the operator.
    pub fn lifted(self, x: (bool, u64), y: (bool, u64), w: u32) -> (bool, u64) {
        match (x.0, y.0) {
            (true, true) => (true, self.apply(x.1, y.1, w)),
            (true, false) => x,
            (false, true) => y,
            (false, false) => x,
        }
    }

    /// The operator as a word expression over `w`-bit operands.
    pub fn expr(self, a: Expr, b: Expr, w: u32) -> Expr {
        use crate::psam::isa::{and, field, leq, mux, or, xor};
        match self {
            StarOp::Add => field(crate::psam::isa::add(a, b), 0, w as u8),
            StarOp::Max => mux(leq(a.clone(), b.clone()), b, a),
            StarOp::Min => mux(leq(a.clone(), b.clone()), a, b),
            StarOp::Or => or(a, b),
            StarOp::Xor => xor(a, b),
            StarOp::First => and(a, Expr::Const(mask(w))),
            StarOp::Last => and(b, Expr::Const(mask(w))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StarOp::Add => "add",
            StarOp::Max => "max",
            StarOp::Min => "min",
            StarOp::Or => "or",
            StarOp::Xor => "xor",
            StarOp::First => "first",
            StarOp::Last => "last",
        }
    }
}

impl std::str::FromStr for StarOp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "+" | "add" | "sum" => Ok(StarOp::Add),
            _ => StarOp::ALL
                .into_iter()
                .find(|op| op.name() == s)
                .ok_or_else(|| format!("unknown conflict operator {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PramLimits {
    pub max_time: u64,
    pub max_work: u64,
}

impl Default for PramLimits {
    fn default() -> Self {
        PramLimits {
            max_time: 1_000_000,
            max_work: 50_000_000,
        }
    }
}

/// An active processor. `pid` follows the heap numbering used by the
/// compiled simulation: the root is 1; a fork turns `p` into `2p` for the
/// parent and `2p + 1` for the child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Processor {
    pub regs: Vec<u64>,
    pub pid: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PramStats {
    pub work: u64,
    pub time: u64,
    pub max_procs: usize,
    /// Bits needed for the largest processor id ever assigned.
    pub pid_bits: u32,
    /// Active processors per step.
    pub active: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PramRun {
    pub output: Vec<u64>,
    pub stats: PramStats,
    pub memory: BTreeMap<u64, u64>,
}

/// Steppable PRAM. Processors are kept in priority order: survivors keep
/// their relative order and new children follow, ordered like their parents.
pub struct PramMachine<'p> {
    program: &'p PramProgram,
    star: StarOp,
    limits: PramLimits,
    procs: Vec<Processor>,
    memory: BTreeMap<u64, u64>,
    input: Vec<u64>,
    in_pos: usize,
    output: Vec<u64>,
    stats: PramStats,
    last_inputs: Vec<(u64, Reg)>,
}

impl<'p> PramMachine<'p> {
    pub fn new(program: &'p PramProgram, input: &[u64], star: StarOp, limits: PramLimits) -> Result<Self, PramError> {
        program.validate()?;
        Ok(PramMachine {
            program,
            star,
            limits,
            procs: vec![Processor {
                regs: vec![0; program.k],
                pid: 1,
            }],
            memory: BTreeMap::new(),
            input: input.iter().map(|&v| v & mask(program.w)).collect(),
            in_pos: 0,
            output: Vec::new(),
            stats: PramStats {
                pid_bits: 1,
                ..PramStats::default()
            },
            last_inputs: Vec::new(),
        })
    }

    pub fn processors(&self) -> &[Processor] {
        &self.procs
    }

    /// Written cells; unwritten addresses hold 0.
    pub fn memory(&self) -> &BTreeMap<u64, u64> {
        &self.memory
    }

    pub fn output(&self) -> &[u64] {
        &self.output
    }

    pub fn stats(&self) -> &PramStats {
        &self.stats
    }

    pub fn is_done(&self) -> bool {
        self.procs.is_empty()
    }

    /// `(pid, register)` for each Input of the last step, in tape order.
    pub fn last_inputs(&self) -> &[(u64, Reg)] {
        &self.last_inputs
    }

    /// Hands the words read by the last step's Inputs out differently:
    /// `words[i]` goes to the processor with pid `pids[i]`. The words must
    /// be a permutation of the ones actually read.
    pub fn reassign_inputs(&mut self, assignment: &[(u64, u64)]) -> Result<(), String> {
        let mut old: Vec<u64> = Vec::new();
        for &(pid, x) in &self.last_inputs {
            let p = self.procs.iter().find(|p| p.pid == pid).ok_or("input processor gone")?;
            old.push(p.regs[x as usize]);
        }
        let mut new: Vec<u64> = assignment.iter().map(|a| a.1).collect();
        old.sort_unstable();
        new.sort_unstable();
        if old != new || assignment.len() != self.last_inputs.len() {
            return Err(format!("words {new:?} are not a permutation of {old:?}"));
        }
        for &(pid, v) in assignment {
            let x = self
                .last_inputs
                .iter()
                .find(|l| l.0 == pid)
                .ok_or_else(|| format!("pid {pid} did not read input"))?
                .1;
            let p = self.procs.iter_mut().find(|p| p.pid == pid).expect("checked above");
            p.regs[x as usize] = v;
        }
        Ok(())
    }

    fn check_addr(&self, addr: u64) -> Result<u64, PramError> {
        if addr >> self.program.addr_bits != 0 {
            return Err(PramError::AddressBound {
                addr,
                bits: self.program.addr_bits,
                step: self.stats.time,
            });
        }
        Ok(addr)
    }

    pub fn step(&mut self) -> Result<(), PramError> {
        let w = self.program.w;
        let now = self.stats.time;
        let procs = std::mem::take(&mut self.procs);
        self.stats.work += procs.len() as u64;
        if self.stats.work > self.limits.max_work {
            return Err(PramError::WorkLimit(self.limits.max_work));
        }
        self.stats.active.push(procs.len());
        self.stats.max_procs = self.stats.max_procs.max(procs.len());

        self.last_inputs.clear();
        let mut writes: HashMap<u64, u64> = HashMap::new();
        let mut survivors = Vec::with_capacity(procs.len());
        let mut children = Vec::new();
        for mut p in procs {
            let pc = p.regs[PC as usize];
            let instr = self
                .program
                .instrs
                .get(pc as usize)
                .ok_or(PramError::InvalidPc { pc, step: now })?;
            let bump = |regs: &mut Vec<u64>| regs[PC as usize] = (pc + 1) & mask(w);
            match instr {
                PramInstr::Update(t) => {
                    let regs = t.apply(&p.regs, w);
                    p.regs = regs;
                    if !t.sets_pc() {
                        bump(&mut p.regs);
                    }
                }
                PramInstr::Read { x, y } => {
                    let addr = self.check_addr(p.regs[*x as usize])?;
                    p.regs[*y as usize] = self.memory.get(&addr).copied().unwrap_or(0);
                    bump(&mut p.regs);
                }
                PramInstr::Write { x, y } => {
                    let addr = self.check_addr(p.regs[*x as usize])?;
                    let v = p.regs[*y as usize];
                    // Processors are visited in priority order.
                    writes
                        .entry(addr)
                        .and_modify(|acc| *acc = self.star.apply(*acc, v, w))
                        .or_insert(v);
                    bump(&mut p.regs);
                }
                PramInstr::Input { x } => {
                    p.regs[*x as usize] = self.input.get(self.in_pos).copied().unwrap_or(0);
                    self.in_pos += 1;
                    self.last_inputs.push((p.pid, *x));
                    bump(&mut p.regs);
                }
                PramInstr::Output { x } => {
                    self.output.push(p.regs[*x as usize]);
                    bump(&mut p.regs);
                }
                PramInstr::Fork(f) => {
                    let child = Processor {
                        regs: f.apply(&p.regs, w),
                        pid: 2 * p.pid + 1,
                    };
                    p.pid *= 2;
                    let bits = 64 - child.pid.leading_zeros();
                    self.stats.pid_bits = self.stats.pid_bits.max(bits);
                    children.push(child);
                    bump(&mut p.regs);
                }
                PramInstr::Die => continue,
            }
            survivors.push(p);
        }
        self.memory.extend(writes);
        survivors.extend(children);
        self.procs = survivors;
        self.stats.time += 1;
        if self.stats.time > self.limits.max_time && !self.procs.is_empty() {
            return Err(PramError::TimeLimit(self.limits.max_time));
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<PramRun, PramError> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(PramRun {
            output: self.output,
            stats: self.stats,
            memory: self.memory,
        })
    }
}

/// Runs `program` to completion on `input` with conflict operator `star`.
pub fn pram_run(program: &PramProgram, input: &[u64], star: StarOp, limits: PramLimits) -> Result<PramRun, PramError> {
    PramMachine::new(program, input, star, limits)?.run()
}

/// Assembler for PRAM programs with symbolic labels.
pub struct PramAsm {
    instrs: Vec<PramInstr>,
    labels: HashMap<String, usize>,
    k: usize,
    w: u32,
    addr_bits: u32,
}

impl PramAsm {
    pub fn new(k: usize, w: u32, addr_bits: u32) -> Self {
        PramAsm {
            instrs: Vec::new(),
            labels: HashMap::new(),
            k,
            w,
            addr_bits,
        }
    }

    pub fn here(&self) -> usize {
        self.instrs.len()
    }

    pub fn label(&mut self, name: &str) {
        let prev = self.labels.insert(name.to_string(), self.instrs.len());
        assert!(prev.is_none(), "label {name:?} defined twice");
    }

    pub fn update(&mut self, assigns: Vec<(Reg, Expr)>) {
        self.instrs.push(PramInstr::Update(Transform::new(assigns)));
    }

    pub fn goto(&mut self, mut assigns: Vec<(Reg, Expr)>, target: &str) {
        assigns.push((PC, crate::psam::isa::label(target)));
        self.update(assigns);
    }

    /// Jumps to `target` when bit 0 of `cond` is set.
    pub fn branch(&mut self, cond: Expr, target: &str) {
        let next = Expr::Const(self.here() as u64 + 1);
        self.update(vec![(PC, crate::psam::isa::mux(cond, crate::psam::isa::label(target), next))]);
    }

    pub fn read(&mut self, x: Reg, y: Reg) {
        self.instrs.push(PramInstr::Read { x, y });
    }

    pub fn write(&mut self, x: Reg, y: Reg) {
        self.instrs.push(PramInstr::Write { x, y });
    }

    pub fn input(&mut self, x: Reg) {
        self.instrs.push(PramInstr::Input { x });
    }

    pub fn output(&mut self, x: Reg) {
        self.instrs.push(PramInstr::Output { x });
    }

    /// Forks a child with `assigns` applied and its PC at `entry`.
    pub fn fork(&mut self, mut assigns: Vec<(Reg, Expr)>, entry: &str) {
        assigns.push((PC, crate::psam::isa::label(entry)));
        self.instrs.push(PramInstr::Fork(Transform::new(assigns)));
    }

    pub fn die(&mut self) {
        self.instrs.push(PramInstr::Die);
    }

    pub fn finish(mut self) -> Result<PramProgram, PramError> {
        let labels = self.labels;
        let lookup = |name: &str| labels.get(name).map(|&v| v as u64);
        for (i, ins) in self.instrs.iter_mut().enumerate() {
            if let PramInstr::Update(t) | PramInstr::Fork(t) = ins {
                for (_, e) in &mut t.assigns {
                    e.resolve_labels(&lookup).map_err(|msg| PramError::Program { index: i, msg })?;
                }
            }
        }
        let p = PramProgram {
            instrs: self.instrs,
            k: self.k,
            w: self.w,
            addr_bits: self.addr_bits,
        };
        p.validate()?;
        Ok(p)
    }
}
