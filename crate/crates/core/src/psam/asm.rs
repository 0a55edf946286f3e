//! A small assembler for PSAM programs with symbolic labels.

use std::collections::HashMap;

use super::isa::*;

pub struct Asm {
    instrs: Vec<Instr>,
    labels: HashMap<String, usize>,
    k: usize,
    w: u32,
    addr_bits: u32,
}

impl Asm {
    pub fn new(k: usize, w: u32, addr_bits: u32) -> Self {
        Asm {
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

    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn empty_handle(&self) -> u64 {
        1 << self.addr_bits
    }

    /// Position of a defined label.
    pub fn label_pos(&self, name: &str) -> Option<usize> {
        self.labels.get(name).copied()
    }

    pub fn label(&mut self, name: &str) {
        let prev = self.labels.insert(name.to_string(), self.instrs.len());
        assert!(prev.is_none(), "label {name:?} defined twice");
    }

    pub fn update(&mut self, assigns: Vec<(Reg, Expr)>) {
        self.instrs.push(Instr::Update(Transform::new(assigns)));
    }

    pub fn nop(&mut self) {
        self.update(Vec::new());
    }

    pub fn nops(&mut self, n: usize) {
        for _ in 0..n {
            self.nop();
        }
    }

    /// Assignments plus an unconditional jump.
    pub fn goto(&mut self, mut assigns: Vec<(Reg, Expr)>, target: &str) {
        assigns.push((PC, label(target)));
        self.update(assigns);
    }

    pub fn jump(&mut self, target: &str) {
        self.goto(Vec::new(), target);
    }

    /// Jumps to `target` when bit 0 of `cond` is set, else falls through.
    pub fn branch(&mut self, cond: Expr, target: &str) {
        let next = k(self.here() as u64 + 1);
        self.update(vec![(PC, mux(cond, label(target), next))]);
    }

    /// Multi-way jump: the first arm whose condition holds, else `default`.
    pub fn switch(&mut self, arms: Vec<(Expr, &str)>, default: &str) {
        let mut e = label(default);
        for (cond, target) in arms.into_iter().rev() {
            e = mux(cond, label(target), e);
        }
        self.update(vec![(PC, e)]);
    }

    pub fn read(&mut self, x: Reg, y: Reg) {
        self.instrs.push(Instr::Read { x, y });
    }

    pub fn write(&mut self, x: Reg, y: Reg) {
        self.instrs.push(Instr::Write { x, y });
    }

    pub fn input(&mut self, x: Reg) {
        self.instrs.push(Instr::Input { x });
    }

    pub fn output(&mut self, x: Reg) {
        self.instrs.push(Instr::Output { x });
    }

    /// Forks a child whose state is this state with `assigns` applied and
    /// PC at `entry`; the token lands in `y`.
    pub fn fork(&mut self, mut assigns: Vec<(Reg, Expr)>, entry: &str, y: Reg) {
        assigns.push((PC, label(entry)));
        self.instrs.push(Instr::Fork {
            f: Transform::new(assigns),
            y,
        });
    }

    pub fn ret(&mut self, x: Reg) {
        self.instrs.push(Instr::Ret { x });
    }

    /// Pads with no-ops until `len` instructions follow label `start`.
    pub fn pad_from(&mut self, start: &str, len: usize) {
        let s = self.labels[start];
        let used = self.here() - s;
        assert!(used <= len, "block {start:?} already {used} long (target {len})");
        self.nops(len - used);
    }

    pub fn finish(mut self) -> Result<Program, ProgramError> {
        let labels = self.labels;
        let lookup = |name: &str| labels.get(name).map(|&v| v as u64);
        for (i, ins) in self.instrs.iter_mut().enumerate() {
            let t = match ins {
                Instr::Update(t) | Instr::Fork { f: t, .. } => t,
                _ => continue,
            };
            for (_, e) in &mut t.assigns {
                e.resolve_labels(&lookup).map_err(|msg| ProgramError { index: i, msg })?;
            }
        }
        let p = Program {
            instrs: self.instrs,
            k: self.k,
            w: self.w,
            addr_bits: self.addr_bits,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Named bit fields packed msb-first into a word.
#[derive(Clone, Debug)]
pub struct Layout {
    fields: Vec<(&'static str, u8)>,
}

impl Layout {
    pub fn new(fields: &[(&'static str, u8)]) -> Self {
        Layout {
            fields: fields.to_vec(),
        }
    }

    pub fn width(&self) -> u32 {
        self.fields.iter().map(|f| f.1 as u32).sum()
    }

    fn locate(&self, name: &str) -> (u8, u8) {
        let mut lo = self.width();
        for &(n, w) in &self.fields {
            lo -= w as u32;
            if n == name {
                return (lo as u8, w);
            }
        }
        panic!("no field {name:?} in layout");
    }

    pub fn get(&self, e: Expr, name: &str) -> Expr {
        let (lo, w) = self.locate(name);
        field(e, lo, w)
    }

    /// Host-side extraction, for decoders and tests.
    pub fn extract(&self, v: u64, name: &str) -> u64 {
        let (lo, w) = self.locate(name);
        (v >> lo) & mask(w as u32)
    }

    /// Builds a word from expressions for every field, in layout order.
    pub fn pack(&self, values: Vec<Expr>) -> Expr {
        assert_eq!(values.len(), self.fields.len(), "layout arity");
        concat(values.into_iter().zip(self.fields.iter().map(|f| f.1)).collect())
    }

    pub fn encode(&self, values: &[u64]) -> u64 {
        assert_eq!(values.len(), self.fields.len(), "layout arity");
        self.fields
            .iter()
            .zip(values)
            .fold(0, |acc, (&(_, w), &v)| (acc << w) | (v & mask(w as u32)))
    }
}
