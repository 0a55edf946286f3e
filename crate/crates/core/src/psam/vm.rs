//! Reference PSAM interpreter.
//!
//! Processes run in lockstep. Within a step they are kept in the order a
//! synthesized circuit assigns them to compute units: each process is
//! followed by the child it forked on the previous step. Write addresses are
//! handed out sequentially in that order.

use std::cmp::Ordering;
use std::fmt::Write as _;

use super::isa::{mask, Expr, Instr, Program, ProgramError, Transform, PC};

/// One piece of a lazy word, msb-first within the word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Seg {
    Known { val: u64, width: u8 },
    /// Bits `lo .. lo + width` of the value a forked child will return.
    Tok { id: u32, lo: u8, width: u8 },
}

impl Seg {
    fn width(&self) -> u8 {
        match self {
            Seg::Known { width, .. } | Seg::Tok { width, .. } => *width,
        }
    }
}

/// A word whose bits may still be owed by a running child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LWord {
    segs: Vec<Seg>,
}

impl LWord {
    pub fn known(val: u64, width: u32) -> Self {
        let mut w = LWord { segs: Vec::new() };
        w.push(Seg::Known {
            val: val & mask(width),
            width: width as u8,
        });
        w
    }

    fn token(id: u32, width: u32) -> Self {
        LWord {
            segs: vec![Seg::Tok {
                id,
                lo: 0,
                width: width as u8,
            }],
        }
    }

    pub fn width(&self) -> u32 {
        self.segs.iter().map(|s| s.width() as u32).sum()
    }

    pub fn value(&self) -> Option<u64> {
        match self.segs.as_slice() {
            [] => Some(0),
            [Seg::Known { val, .. }] => Some(*val),
            _ => None,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = u32> + '_ {
        self.segs.iter().filter_map(|s| match s {
            Seg::Tok { id, .. } => Some(*id),
            Seg::Known { .. } => None,
        })
    }

    fn push(&mut self, s: Seg) {
        if s.width() == 0 {
            return;
        }
        if let (Some(Seg::Known { val, width }), Seg::Known { val: v2, width: w2 }) = (self.segs.last_mut(), &s) {
            *val = (*val << w2) | v2;
            *width += w2;
            return;
        }
        self.segs.push(s);
    }

    /// Bits `lo .. lo + width`, as a `width`-bit word.
    fn slice(&self, lo: u32, width: u32) -> LWord {
        let mut out = LWord { segs: Vec::new() };
        let total = self.width();
        let hi = lo + width;
        // Segment bit ranges counted from the lsb.
        let mut top = total;
        for s in &self.segs {
            let sw = s.width() as u32;
            let bottom = top - sw;
            let a = bottom.max(lo);
            let b = top.min(hi);
            if a < b {
                let (off, n) = (a - bottom, b - a);
                out.push(match s {
                    Seg::Known { val, .. } => Seg::Known {
                        val: (val >> off) & mask(n),
                        width: n as u8,
                    },
                    Seg::Tok { id, lo: tlo, .. } => Seg::Tok {
                        id: *id,
                        lo: tlo + off as u8,
                        width: n as u8,
                    },
                });
            }
            top = bottom;
        }
        out
    }

    fn concat(parts: &[LWord]) -> LWord {
        let mut out = LWord { segs: Vec::new() };
        for p in parts {
            for s in &p.segs {
                out.push(s.clone());
            }
        }
        out
    }

    fn zero_extend(self, w: u32) -> LWord {
        let pad = w - self.width();
        LWord::concat(&[LWord::known(0, pad), self])
    }
}

/// Why a run produced ⊥.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Crash {
    #[error("step {step}: address {addr} read twice")]
    DoubleRead { addr: u64, step: u64 },
    #[error("step {step}: address {addr} read before being written")]
    ReadFresh { addr: u64, step: u64 },
    #[error("step {step}: token {token} dereferenced before its child returned")]
    PrematureDeref { token: u32, step: u64 },
    #[error("step {step}: program counter {pc} out of range")]
    InvalidPc { pc: u64, step: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PsamError {
    #[error("work limit {0} exceeded")]
    WorkLimit(u64),
    #[error("time limit {0} exceeded")]
    TimeLimit(u64),
    #[error("address space of {0} bits exhausted")]
    AddressSpace(u32),
    #[error("lineage deeper than {0}")]
    Lineage(usize),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_work: u64,
    pub max_time: u64,
    pub max_lineage: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_work: 50_000_000,
            max_time: 5_000_000,
            max_lineage: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Process {
    pub regs: Vec<LWord>,
    /// Steps executed so far.
    pub age: u32,
    /// Ages of the parent, grandparent, … when each was forked.
    pub lineage: Vec<u32>,
    /// Token this process delivers to on `ret`; `None` for the root.
    pub ret_to: Option<u32>,
}

/// Older first; ties by the parent's age at the fork, then further up.
pub fn priority_compare(p: &Process, q: &Process) -> Ordering {
    q.age.cmp(&p.age).then_with(|| {
        for (a, b) in p.lineage.iter().zip(&q.lineage) {
            match b.cmp(a) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        q.lineage.len().cmp(&p.lineage.len())
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum CellState {
    Written(LWord),
    Consumed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRecord {
    pub written_at: u64,
    pub read_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum TokenState {
    Pending,
    Delivered { value: LWord, at: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub work: u64,
    pub time: u64,
    pub active: Vec<u32>,
    pub inputs_consumed: u64,
    pub cells: Vec<CellRecord>,
    /// Steps where tape priority order differed from unit order.
    pub tape_divergences: u64,
    /// Per step, the instruction kinds executed in unit order.
    pub schedule: Vec<Vec<&'static str>>,
}

impl Trace {
    /// Line-oriented dump: one line per step, then one per cell.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut total = 0u64;
        for (t, &k) in self.active.iter().enumerate() {
            total += k as u64;
            let _ = writeln!(out, "step={t} active={k} work_total={total}");
        }
        for (a, c) in self.cells.iter().enumerate() {
            match c.read_at {
                Some(r) => {
                    let _ = writeln!(out, "addr={a} written_at={} read_at={r}", c.written_at);
                }
                None => {
                    let _ = writeln!(out, "addr={a} written_at={} read_at=-", c.written_at);
                }
            }
        }
        out
    }
}

/// True iff every written address was eventually read.
pub fn check_clean(trace: &Trace) -> bool {
    trace.cells.iter().all(|c| c.read_at.is_some())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Halted(Vec<u64>),
    Crashed(Crash),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub outcome: Outcome,
    pub trace: Trace,
}

impl Run {
    pub fn output(&self) -> Option<&[u64]> {
        match &self.outcome {
            Outcome::Halted(o) => Some(o),
            Outcome::Crashed(_) => None,
        }
    }
}

pub struct Machine<'p> {
    program: &'p Program,
    limits: Limits,
    procs: Vec<Process>,
    cells: Vec<CellState>,
    tokens: Vec<TokenState>,
    input: Vec<u64>,
    in_pos: usize,
    output: Vec<LWord>,
    trace: Trace,
    crash: Option<Crash>,
}

impl<'p> Machine<'p> {
    pub fn new(program: &'p Program, input: &[u64], limits: Limits) -> Result<Self, PsamError> {
        program.validate()?;
        let root = Process {
            regs: vec![LWord::known(0, program.w); program.k],
            age: 0,
            lineage: Vec::new(),
            ret_to: None,
        };
        Ok(Machine {
            program,
            limits,
            procs: vec![root],
            cells: Vec::new(),
            tokens: Vec::new(),
            input: input.iter().map(|&v| v & mask(program.w)).collect(),
            in_pos: 0,
            output: Vec::new(),
            trace: Trace::default(),
            crash: None,
        })
    }

    /// Stores words in fresh cells before the first step and returns their
    /// addresses. Lets tests start from a prepared memory image.
    pub fn preload(&mut self, words: &[u64]) -> Result<Vec<u64>, PsamError> {
        assert_eq!(self.trace.time, 0, "preload after the first step");
        let w = self.program.w;
        let mut addrs = Vec::with_capacity(words.len());
        for &v in words {
            let addr = self.cells.len() as u64;
            if addr >= 1 << self.program.addr_bits {
                return Err(PsamError::AddressSpace(self.program.addr_bits));
            }
            self.cells.push(CellState::Written(LWord::known(v & mask(w), w)));
            self.trace.cells.push(CellRecord {
                written_at: 0,
                read_at: None,
            });
            addrs.push(addr);
        }
        Ok(addrs)
    }

    pub fn processes(&self) -> &[Process] {
        &self.procs
    }

    pub fn now(&self) -> u64 {
        self.trace.time
    }

    pub fn is_done(&self) -> bool {
        self.procs.is_empty() || self.crash.is_some()
    }

    pub fn crash(&self) -> Option<&Crash> {
        self.crash.as_ref()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Value stored at an unread address, if fully known.
    pub fn peek(&self, addr: u64) -> Option<u64> {
        match self.cells.get(addr as usize)? {
            CellState::Written(w) => self.settle(w),
            CellState::Consumed => None,
        }
    }

    /// Output tape so far; `None` for words that are not settled yet.
    pub fn outputs(&self) -> Vec<Option<u64>> {
        self.output.iter().map(|w| self.settle(w)).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_unread(&self, addr: u64) -> bool {
        matches!(self.cells.get(addr as usize), Some(CellState::Written(_)))
    }

    /// Value of a lazy word with every delivered token substituted.
    pub fn settle(&self, w: &LWord) -> Option<u64> {
        self.force_at(w, u64::MAX).ok()
    }

    /// Forces a word at step `now`: every token must have been delivered at
    /// an earlier step.
    fn force_at(&self, w: &LWord, now: u64) -> Result<u64, u32> {
        let mut v = 0u64;
        for s in &w.segs {
            let part = match s {
                Seg::Known { val, .. } => *val,
                Seg::Tok { id, lo, width } => match &self.tokens[*id as usize] {
                    TokenState::Delivered { value, at } if *at < now => {
                        (self.force_at(value, now)? >> lo) & mask(*width as u32)
                    }
                    _ => return Err(*id),
                },
            };
            v = (v << s.width()) | part;
        }
        Ok(v)
    }

    fn force(&self, w: &LWord) -> Result<u64, Crash> {
        let now = self.trace.time;
        self.force_at(w, now)
            .map_err(|token| Crash::PrematureDeref { token, step: now })
    }

    fn eval(&self, e: &Expr, regs: &[LWord]) -> Result<LWord, Crash> {
        let w = self.program.w;
        let strict = |x: &Expr| -> Result<u64, Crash> { self.force(&self.eval(x, regs)?) };
        let known = |v: u64| Ok(LWord::known(v, w));
        match e {
            Expr::Reg(r) => Ok(regs[*r as usize].clone()),
            Expr::Const(v) => known(*v),
            Expr::Field(x, lo, width) => Ok(self.eval(x, regs)?.slice(*lo as u32, *width as u32).zero_extend(w)),
            Expr::Concat(parts) => {
                let mut pieces = Vec::with_capacity(parts.len());
                for (x, width) in parts {
                    pieces.push(self.eval(x, regs)?.slice(0, *width as u32));
                }
                Ok(LWord::concat(&pieces).zero_extend(w))
            }
            Expr::Shl(x, by) => {
                let v = self.eval(x, regs)?;
                Ok(LWord::concat(&[v.slice(0, w - *by as u32), LWord::known(0, *by as u32)]))
            }
            Expr::Shr(x, by) => Ok(self.eval(x, regs)?.slice(*by as u32, w - *by as u32).zero_extend(w)),
            Expr::Mux(c, t, f) => {
                let cond = self.force(&self.eval(c, regs)?.slice(0, 1))?;
                if cond == 1 {
                    self.eval(t, regs)
                } else {
                    self.eval(f, regs)
                }
            }
            Expr::Label(name) => panic!("unresolved label {name}"),
            _ => {
                // Remaining operators need every bit: evaluate strictly.
                let vals = strict_operands(e, &strict)?;
                known(apply_strict(e, &vals, w))
            }
        }
    }

    fn apply(&self, t: &Transform, regs: &[LWord]) -> Result<Vec<LWord>, Crash> {
        let mut vals = Vec::with_capacity(t.assigns.len());
        for (_, e) in &t.assigns {
            vals.push(self.eval(e, regs)?);
        }
        let mut out = regs.to_vec();
        for ((r, _), v) in t.assigns.iter().zip(vals) {
            out[*r as usize] = v;
        }
        Ok(out)
    }

    /// Runs one lockstep step. Returns the crash if the step crashed.
    pub fn step(&mut self) -> Result<Option<Crash>, PsamError> {
        if self.is_done() {
            return Ok(self.crash.clone());
        }
        match self.step_inner() {
            Ok(()) => Ok(None),
            Err(StepErr::Crash(c)) => {
                self.crash = Some(c.clone());
                Ok(Some(c))
            }
            Err(StepErr::Fatal(e)) => Err(e),
        }
    }

    fn step_inner(&mut self) -> Result<(), StepErr> {
        let now = self.trace.time;
        let w = self.program.w;
        let procs = std::mem::take(&mut self.procs);
        self.trace.work += procs.len() as u64;
        if self.trace.work > self.limits.max_work {
            return Err(StepErr::Fatal(PsamError::WorkLimit(self.limits.max_work)));
        }
        self.trace.active.push(procs.len() as u32);

        let pcs: Vec<Option<u64>> = procs.iter().map(|p| self.force(&p.regs[PC as usize]).ok()).collect();
        // Tape slots by priority among this step's tape users.
        let tape_rank = |kind: fn(&Instr) -> bool, procs: &[Process], prog: &Program| -> Vec<Option<usize>> {
            let users: Vec<usize> = (0..procs.len())
                .filter(|&i| pcs[i].and_then(|pc| prog.instrs.get(pc as usize)).is_some_and(kind))
                .collect();
            let mut ordered = users.clone();
            ordered.sort_by(|&a, &b| priority_compare(&procs[a], &procs[b]));
            let mut rank = vec![None; procs.len()];
            for (r, &i) in ordered.iter().enumerate() {
                rank[i] = Some(r);
            }
            rank
        };
        let in_rank = tape_rank(|i| matches!(i, Instr::Input { .. }), &procs, self.program);
        let out_rank = tape_rank(|i| matches!(i, Instr::Output { .. }), &procs, self.program);
        let diverged = |rank: &[Option<usize>]| {
            let seq: Vec<usize> = rank.iter().flatten().copied().collect();
            seq.windows(2).any(|p| p[0] > p[1])
        };
        if diverged(&in_rank) || diverged(&out_rank) {
            self.trace.tape_divergences += 1;
        }
        let n_in = in_rank.iter().flatten().count();
        let in_base = self.in_pos;
        self.in_pos += n_in;
        self.trace.inputs_consumed += n_in as u64;
        let n_out = out_rank.iter().flatten().count();
        let out_base = self.output.len();
        self.output.resize(out_base + n_out, LWord::known(0, w));

        let mut next = Vec::with_capacity(procs.len() + 4);
        let mut kinds = Vec::with_capacity(procs.len());
        for (i, mut p) in procs.into_iter().enumerate() {
            let pc_word = &p.regs[PC as usize];
            let pc = self.force(pc_word)?;
            let instr = match self.program.instrs.get(pc as usize) {
                Some(ins) => ins,
                None => return Err(StepErr::Crash(Crash::InvalidPc { pc, step: now })),
            };
            kinds.push(instr.name());
            let bump = |regs: &mut Vec<LWord>| regs[PC as usize] = LWord::known(pc + 1, w);
            let mut child = None;
            match instr {
                Instr::Update(t) => {
                    let mut regs = self.apply(t, &p.regs)?;
                    if !t.sets_pc() {
                        bump(&mut regs);
                    }
                    p.regs = regs;
                }
                Instr::Read { x, y } => {
                    let addr = self.force(&p.regs[*x as usize])?;
                    let word = match self.cells.get_mut(addr as usize) {
                        None => return Err(StepErr::Crash(Crash::ReadFresh { addr, step: now })),
                        Some(CellState::Consumed) => {
                            return Err(StepErr::Crash(Crash::DoubleRead { addr, step: now }))
                        }
                        Some(cell) => match std::mem::replace(cell, CellState::Consumed) {
                            CellState::Written(v) => v,
                            CellState::Consumed => unreachable!(),
                        },
                    };
                    self.trace.cells[addr as usize].read_at = Some(now);
                    p.regs[*y as usize] = word;
                    bump(&mut p.regs);
                }
                Instr::Write { x, y } => {
                    let addr = self.cells.len() as u64;
                    if addr >= 1 << self.program.addr_bits {
                        return Err(StepErr::Fatal(PsamError::AddressSpace(self.program.addr_bits)));
                    }
                    self.cells.push(CellState::Written(p.regs[*x as usize].clone()));
                    self.trace.cells.push(CellRecord {
                        written_at: now,
                        read_at: None,
                    });
                    p.regs[*y as usize] = LWord::known(addr, w);
                    bump(&mut p.regs);
                }
                Instr::Input { x } => {
                    let pos = in_base + in_rank[i].expect("input rank");
                    p.regs[*x as usize] = LWord::known(self.input.get(pos).copied().unwrap_or(0), w);
                    bump(&mut p.regs);
                }
                Instr::Output { x } => {
                    self.output[out_base + out_rank[i].expect("output rank")] = p.regs[*x as usize].clone();
                    bump(&mut p.regs);
                }
                Instr::Fork { f, y } => {
                    let regs = self.apply(f, &p.regs)?;
                    let id = self.tokens.len() as u32;
                    self.tokens.push(TokenState::Pending);
                    let mut lineage = Vec::with_capacity(p.lineage.len() + 1);
                    lineage.push(p.age + 1);
                    lineage.extend_from_slice(&p.lineage);
                    if lineage.len() > self.limits.max_lineage {
                        return Err(StepErr::Fatal(PsamError::Lineage(self.limits.max_lineage)));
                    }
                    child = Some(Process {
                        regs,
                        age: 0,
                        lineage,
                        ret_to: Some(id),
                    });
                    p.regs[*y as usize] = LWord::token(id, w);
                    bump(&mut p.regs);
                }
                Instr::Ret { x } => {
                    if let Some(t) = p.ret_to {
                        self.tokens[t as usize] = TokenState::Delivered {
                            value: p.regs[*x as usize].clone(),
                            at: now,
                        };
                    }
                    continue;
                }
            }
            p.age += 1;
            next.push(p);
            if let Some(c) = child {
                next.push(c);
            }
        }
        self.trace.schedule.push(kinds);
        self.procs = next;
        self.trace.time += 1;
        if self.trace.time > self.limits.max_time {
            return Err(StepErr::Fatal(PsamError::TimeLimit(self.limits.max_time)));
        }
        Ok(())
    }

    /// Runs to completion and settles the output tape.
    pub fn run(mut self) -> Result<Run, PsamError> {
        while !self.is_done() {
            self.step()?;
        }
        let outcome = match self.crash.take() {
            Some(c) => Outcome::Crashed(c),
            None => {
                let mut out = Vec::with_capacity(self.output.len());
                let mut crash = None;
                for wv in &self.output {
                    match self.force_at(wv, u64::MAX) {
                        Ok(v) => out.push(v),
                        Err(token) => {
                            crash = Some(Crash::PrematureDeref {
                                token,
                                step: self.trace.time,
                            });
                            break;
                        }
                    }
                }
                match crash {
                    Some(c) => Outcome::Crashed(c),
                    None => Outcome::Halted(out),
                }
            }
        };
        Ok(Run {
            outcome,
            trace: self.trace,
        })
    }
}

enum StepErr {
    Crash(Crash),
    Fatal(PsamError),
}

impl From<Crash> for StepErr {
    fn from(c: Crash) -> Self {
        StepErr::Crash(c)
    }
}

fn strict_operands(e: &Expr, strict: &dyn Fn(&Expr) -> Result<u64, Crash>) -> Result<Vec<u64>, Crash> {
    match e {
        Expr::Not(a) => Ok(vec![strict(a)?]),
        Expr::Add(a, b)
        | Expr::Sub(a, b)
        | Expr::And(a, b)
        | Expr::Or(a, b)
        | Expr::Xor(a, b)
        | Expr::Eq(a, b)
        | Expr::Ltu(a, b)
        | Expr::Leq(a, b) => Ok(vec![strict(a)?, strict(b)?]),
        other => unreachable!("not a strict operator: {other:?}"),
    }
}

fn apply_strict(e: &Expr, v: &[u64], w: u32) -> u64 {
    let m = mask(w);
    match e {
        Expr::Not(_) => !v[0] & m,
        Expr::Add(..) => v[0].wrapping_add(v[1]) & m,
        Expr::Sub(..) => v[0].wrapping_sub(v[1]) & m,
        Expr::And(..) => v[0] & v[1],
        Expr::Or(..) => v[0] | v[1],
        Expr::Xor(..) => v[0] ^ v[1],
        Expr::Eq(..) => (v[0] == v[1]) as u64,
        Expr::Ltu(..) => (v[0] < v[1]) as u64,
        Expr::Leq(..) => (v[0] <= v[1]) as u64,
        _ => unreachable!(),
    }
}

/// Runs `program` on `input` to completion.
pub fn psam_run(program: &Program, input: &[u64], limits: Limits) -> Result<Run, PsamError> {
    Machine::new(program, input, limits)?.run()
}
