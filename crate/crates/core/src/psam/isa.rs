//! PSAM instructions and the word-level expression language used by state
//! transforms.

use std::fmt;

/// Register index into a process's local state. Register 0 is the PC.
pub type Reg = u8;
pub const PC: Reg = 0;

/// A word expression over the current local state. Every value is a
/// `w`-bit unsigned word; results are truncated to `w` bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Reg(Reg),
    Const(u64),
    /// `width` bits of the operand starting at bit `lo` (lsb = bit 0).
    Field(Box<Expr>, u8, u8),
    /// Pieces msb-first; each contributes the low `width` bits of its expr.
    Concat(Vec<(Expr, u8)>),
    Shl(Box<Expr>, u8),
    Shr(Box<Expr>, u8),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// 1 if equal else 0.
    Eq(Box<Expr>, Box<Expr>),
    /// 1 if unsigned `a < b` else 0.
    Ltu(Box<Expr>, Box<Expr>),
    /// 1 if unsigned `a ≤ b` else 0.
    Leq(Box<Expr>, Box<Expr>),
    /// `then` when bit 0 of the condition is set, else `otherwise`.
    Mux(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Program location, replaced by a constant when the program is built.
    Label(String),
}

pub fn reg(r: Reg) -> Expr {
    Expr::Reg(r)
}
pub fn k(v: u64) -> Expr {
    Expr::Const(v)
}
pub fn label(name: &str) -> Expr {
    Expr::Label(name.to_string())
}
pub fn field(e: Expr, lo: u8, width: u8) -> Expr {
    Expr::Field(Box::new(e), lo, width)
}
pub fn concat(parts: Vec<(Expr, u8)>) -> Expr {
    Expr::Concat(parts)
}
pub fn shl(e: Expr, by: u8) -> Expr {
    Expr::Shl(Box::new(e), by)
}
pub fn shr(e: Expr, by: u8) -> Expr {
    Expr::Shr(Box::new(e), by)
}
pub fn add(a: Expr, b: Expr) -> Expr {
    Expr::Add(Box::new(a), Box::new(b))
}
pub fn sub(a: Expr, b: Expr) -> Expr {
    Expr::Sub(Box::new(a), Box::new(b))
}
pub fn and(a: Expr, b: Expr) -> Expr {
    Expr::And(Box::new(a), Box::new(b))
}
pub fn or(a: Expr, b: Expr) -> Expr {
    Expr::Or(Box::new(a), Box::new(b))
}
pub fn xor(a: Expr, b: Expr) -> Expr {
    Expr::Xor(Box::new(a), Box::new(b))
}
pub fn not(a: Expr) -> Expr {
    Expr::Not(Box::new(a))
}
pub fn eq(a: Expr, b: Expr) -> Expr {
    Expr::Eq(Box::new(a), Box::new(b))
}
pub fn ltu(a: Expr, b: Expr) -> Expr {
    Expr::Ltu(Box::new(a), Box::new(b))
}
pub fn leq(a: Expr, b: Expr) -> Expr {
    Expr::Leq(Box::new(a), Box::new(b))
}
pub fn mux(c: Expr, then: Expr, otherwise: Expr) -> Expr {
    Expr::Mux(Box::new(c), Box::new(then), Box::new(otherwise))
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Expr {
    /// Strict evaluation over fully known registers.
    pub fn eval(&self, regs: &[u64], w: u32) -> u64 {
        let m = mask(w);
        let bin = |a: &Expr, b: &Expr| (a.eval(regs, w), b.eval(regs, w));
        match self {
            Expr::Reg(r) => regs[*r as usize] & m,
            Expr::Const(v) => v & m,
            Expr::Field(e, lo, width) => (e.eval(regs, w) >> lo) & mask(*width as u32),
            Expr::Concat(parts) => {
                let mut v = 0u64;
                for (e, width) in parts {
                    v = (v << width) | (e.eval(regs, w) & mask(*width as u32));
                }
                v & m
            }
            Expr::Shl(e, by) => (e.eval(regs, w) << by) & m,
            Expr::Shr(e, by) => e.eval(regs, w) >> by,
            Expr::Add(a, b) => {
                let (x, y) = bin(a, b);
                x.wrapping_add(y) & m
            }
            Expr::Sub(a, b) => {
                let (x, y) = bin(a, b);
                x.wrapping_sub(y) & m
            }
            Expr::And(a, b) => {
                let (x, y) = bin(a, b);
                x & y
            }
            Expr::Or(a, b) => {
                let (x, y) = bin(a, b);
                x | y
            }
            Expr::Xor(a, b) => {
                let (x, y) = bin(a, b);
                x ^ y
            }
            Expr::Not(a) => !a.eval(regs, w) & m,
            Expr::Eq(a, b) => {
                let (x, y) = bin(a, b);
                (x == y) as u64
            }
            Expr::Ltu(a, b) => {
                let (x, y) = bin(a, b);
                (x < y) as u64
            }
            Expr::Leq(a, b) => {
                let (x, y) = bin(a, b);
                (x <= y) as u64
            }
            Expr::Mux(c, t, e) => {
                if c.eval(regs, w) & 1 == 1 {
                    t.eval(regs, w)
                } else {
                    e.eval(regs, w)
                }
            }
            Expr::Label(name) => panic!("unresolved label {name}"),
        }
    }

    pub(crate) fn resolve_labels(&mut self, lookup: &dyn Fn(&str) -> Option<u64>) -> Result<(), String> {
        match self {
            Expr::Label(name) => {
                let v = lookup(name).ok_or_else(|| format!("unknown label {name:?}"))?;
                *self = Expr::Const(v);
            }
            Expr::Reg(_) | Expr::Const(_) => {}
            Expr::Field(e, _, _) | Expr::Shl(e, _) | Expr::Shr(e, _) | Expr::Not(e) => e.resolve_labels(lookup)?,
            Expr::Concat(parts) => {
                for (e, _) in parts {
                    e.resolve_labels(lookup)?;
                }
            }
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Xor(a, b)
            | Expr::Eq(a, b)
            | Expr::Ltu(a, b)
            | Expr::Leq(a, b) => {
                a.resolve_labels(lookup)?;
                b.resolve_labels(lookup)?;
            }
            Expr::Mux(c, t, e) => {
                c.resolve_labels(lookup)?;
                t.resolve_labels(lookup)?;
                e.resolve_labels(lookup)?;
            }
        }
        Ok(())
    }

    fn validate(&self, k: usize, w: u32) -> Result<(), String> {
        match self {
            Expr::Reg(r) if (*r as usize) >= k => Err(format!("register r{r} out of range (K = {k})")),
            Expr::Reg(_) | Expr::Const(_) => Ok(()),
            Expr::Label(name) => Err(format!("unresolved label {name:?}")),
            Expr::Field(e, lo, width) => {
                if *lo as u32 + *width as u32 > w {
                    return Err(format!("field [{lo}; {width}] exceeds word width {w}"));
                }
                e.validate(k, w)
            }
            Expr::Shl(e, by) | Expr::Shr(e, by) => {
                if *by as u32 >= w {
                    return Err(format!("shift by {by} on {w}-bit words"));
                }
                e.validate(k, w)
            }
            Expr::Not(e) => e.validate(k, w),
            Expr::Concat(parts) => {
                let total: u32 = parts.iter().map(|(_, width)| *width as u32).sum();
                if total > w {
                    return Err(format!("concat of {total} bits exceeds word width {w}"));
                }
                parts.iter().try_for_each(|(e, _)| e.validate(k, w))
            }
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Xor(a, b)
            | Expr::Eq(a, b)
            | Expr::Ltu(a, b)
            | Expr::Leq(a, b) => {
                a.validate(k, w)?;
                b.validate(k, w)
            }
            Expr::Mux(c, t, e) => {
                c.validate(k, w)?;
                t.validate(k, w)?;
                e.validate(k, w)
            }
        }
    }
}

/// Simultaneous assignment to registers. When used as an update, an
/// unassigned PC advances by one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transform {
    pub assigns: Vec<(Reg, Expr)>,
}

impl Transform {
    pub fn new(assigns: Vec<(Reg, Expr)>) -> Self {
        Transform { assigns }
    }

    pub fn sets_pc(&self) -> bool {
        self.assigns.iter().any(|(r, _)| *r == PC)
    }

    /// Strict application; returns the new register file.
    pub fn apply(&self, regs: &[u64], w: u32) -> Vec<u64> {
        let vals: Vec<u64> = self.assigns.iter().map(|(_, e)| e.eval(regs, w)).collect();
        let mut out = regs.to_vec();
        for ((r, _), v) in self.assigns.iter().zip(vals) {
            out[*r as usize] = v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instr {
    Update(Transform),
    /// `y ← read x`
    Read { x: Reg, y: Reg },
    /// `y ← write x`
    Write { x: Reg, y: Reg },
    /// `x ← input`
    Input { x: Reg },
    Output { x: Reg },
    /// `y ← fork f(state)`; `f` must set the child's PC.
    Fork { f: Transform, y: Reg },
    Ret { x: Reg },
}

impl Instr {
    pub fn name(&self) -> &'static str {
        match self {
            Instr::Update(_) => "update",
            Instr::Read { .. } => "read",
            Instr::Write { .. } => "write",
            Instr::Input { .. } => "input",
            Instr::Output { .. } => "output",
            Instr::Fork { .. } => "fork",
            Instr::Ret { .. } => "ret",
        }
    }
}

/// A PSAM program: `k` registers of `w` bits each (register 0 is the PC)
/// and `addr_bits`-bit memory addresses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub instrs: Vec<Instr>,
    pub k: usize,
    pub w: u32,
    pub addr_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("instruction {index}: {msg}")]
pub struct ProgramError {
    pub index: usize,
    pub msg: String,
}

impl Program {
    pub fn validate(&self) -> Result<(), ProgramError> {
        let err = |index, msg: String| ProgramError { index, msg };
        if self.k < 2 {
            return Err(err(0, "need at least the PC and one register".into()));
        }
        if !(1..=64).contains(&self.w) || self.addr_bits + 1 > self.w {
            return Err(err(0, format!("word width {} cannot hold {}-bit handles", self.w, self.addr_bits + 1)));
        }
        let reg_ok = |r: Reg| (r as usize) < self.k;
        for (i, ins) in self.instrs.iter().enumerate() {
            let regs: Vec<Reg> = match ins {
                Instr::Update(t) => {
                    for (r, e) in &t.assigns {
                        e.validate(self.k, self.w).map_err(|m| err(i, m))?;
                        if !reg_ok(*r) {
                            return Err(err(i, format!("register r{r} out of range")));
                        }
                    }
                    Vec::new()
                }
                Instr::Fork { f, y } => {
                    for (r, e) in &f.assigns {
                        e.validate(self.k, self.w).map_err(|m| err(i, m))?;
                        if !reg_ok(*r) {
                            return Err(err(i, format!("register r{r} out of range")));
                        }
                    }
                    if !f.sets_pc() {
                        return Err(err(i, "fork transform must set the child's PC".into()));
                    }
                    vec![*y]
                }
                Instr::Read { x, y } | Instr::Write { x, y } => vec![*x, *y],
                Instr::Input { x } | Instr::Output { x } | Instr::Ret { x } => vec![*x],
            };
            if let Some(r) = regs.into_iter().find(|&r| !reg_ok(r)) {
                return Err(err(i, format!("register r{r} out of range")));
            }
        }
        Ok(())
    }

    /// Handle value naming the empty tree / empty stack.
    pub fn empty_handle(&self) -> u64 {
        1 << self.addr_bits
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "; K={} w={} A={}", self.k, self.w, self.addr_bits)?;
        for (i, ins) in self.instrs.iter().enumerate() {
            match ins {
                Instr::Update(t) => writeln!(f, "{i:4}: update {:?}", t.assigns)?,
                Instr::Read { x, y } => writeln!(f, "{i:4}: r{y} <- read r{x}")?,
                Instr::Write { x, y } => writeln!(f, "{i:4}: r{y} <- write r{x}")?,
                Instr::Input { x } => writeln!(f, "{i:4}: r{x} <- input")?,
                Instr::Output { x } => writeln!(f, "{i:4}: output r{x}")?,
                Instr::Fork { f: t, y } => writeln!(f, "{i:4}: r{y} <- fork {:?}", t.assigns)?,
                Instr::Ret { x } => writeln!(f, "{i:4}: ret r{x}")?,
            }
        }
        Ok(())
    }
}
