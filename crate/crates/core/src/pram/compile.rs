//! Compiles a PRAM program into a PSAM program that simulates it step by
//! step on path trees.
//!
//! Memory lives in a tree keyed by address. Processors live in a tree keyed
//! by `address ‖ pid`, where the address is the one the processor touches
//! next, so a processor meets its memory cell on the way down. One PRAM step
//! is a recursive walk over both trees; shallow subtrees run in forked
//! processes and the deep one continues inline on a stack kept in memory.
//! Every routine takes a fixed number of steps whatever its input, which is
//! what lets a consumer force a handle without waiting on it.

use crate::psam::asm::Asm;
use crate::psam::isa::*;

use super::machine::{PramInstr, PramProgram, StarOp};
use super::tree::{FormatError, SimFormat, KIND_BRANCH, KIND_LEAF};

pub(crate) const M: Reg = 1;
pub(crate) const PR: Reg = 2;
const LV: Reg = 3;
const SP: Reg = 4;
const N: Reg = 5;
const N1: Reg = 6;
const X0: Reg = 7;
const X1: Reg = 8;
const TL: Reg = 9;
const TR: Reg = 10;
const RA: Reg = 11;
const H: Reg = 12;
const U: Reg = 13;
const V: Reg = 14;
const R0: Reg = 15;
const R1: Reg = 16;
pub const REGS: usize = 17;

/// Steps from `merge` entry to its exit jump.
pub const MERGE_EXIT: usize = 8;
/// Steps from `encode` entry to its exit jump.
pub const ENCODE_EXIT: usize = 4;
/// Steps taken by an inline split.
pub const SPLIT_STEPS: usize = 6;
/// Handler block stride.
const HLEN: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("conflict operator {0:?} is not commutative; the simulation merges writes in tree order")]
    NonCommutative(StarOp),
    #[error("PRAM program: {0}")]
    Pram(String),
    #[error("generated program: {0}")]
    Psam(#[from] ProgramError),
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    /// Bits for processor ids; a fork past this bound crashes the run.
    pub pid_bits: u32,
    /// PSAM address bits.
    pub psam_addr_bits: u32,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            pid_bits: 8,
            psam_addr_bits: 24,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledPram {
    pub program: Program,
    pub format: SimFormat,
    pub star: StarOp,
    /// PC of the driver loop head. When the root process sits here its
    /// `M` and `PR` registers hold the settled trees after each PRAM step.
    pub loop_pc: u64,
    /// Driver idle steps after each PRAM step.
    pub settle: u64,
}

impl CompiledPram {
    pub fn mem_reg(&self) -> Reg {
        M
    }

    pub fn proc_reg(&self) -> Reg {
        PR
    }
}

/// Expression builders over the tree formats.
struct Fx {
    f: SimFormat,
}

impl Fx {
    fn w(&self) -> u8 {
        self.f.w as u8
    }
    fn h(&self) -> u8 {
        self.f.h() as u8
    }
    fn db(&self) -> u8 {
        self.f.db as u8
    }
    fn wp(&self) -> u8 {
        self.f.wp as u8
    }
    fn e(&self) -> Expr {
        k(self.f.empty())
    }
    fn is_e(&self, x: Expr) -> Expr {
        eq(x, self.e())
    }
    fn is_leaf(&self, x: Expr) -> Expr {
        eq(field(x, self.w() - 2, 2), k(KIND_LEAF))
    }
    fn payload(&self, x: Expr) -> Expr {
        field(x, 0, self.w() - 2)
    }
    fn leaf(&self, p: Expr) -> Expr {
        concat(vec![(k(KIND_LEAF), 2), (p, self.w() - 2)])
    }
    fn branch(&self, dl: Expr, hl: Expr, dr: Expr, hr: Expr) -> Expr {
        let (h, db) = (self.h(), self.db());
        let mut parts = vec![(k(KIND_BRANCH), 2)];
        let pad = self.w() - 2 - 2 * db - 2 * h;
        if pad > 0 {
            parts.push((k(0), pad));
        }
        parts.extend([(dl, db), (hl, h), (dr, db), (hr, h)]);
        concat(parts)
    }
    fn dl(&self, x: Expr) -> Expr {
        field(x, 2 * self.h() + self.db(), self.db())
    }
    fn hl(&self, x: Expr) -> Expr {
        field(x, self.h() + self.db(), self.h())
    }
    fn dr(&self, x: Expr) -> Expr {
        field(x, self.h(), self.db())
    }
    fn hr(&self, x: Expr) -> Expr {
        field(x, 0, self.h())
    }
    fn pair(&self, m: Expr, p: Expr) -> Expr {
        concat(vec![(m, self.h()), (p, self.h())])
    }
    fn frame(&self, ls: Expr, c: Expr, prev: Expr) -> Expr {
        concat(vec![(ls, 1), (c, self.h()), (prev, self.h() + 1)])
    }
    /// Register `r` of a processor payload.
    fn preg(&self, x: Expr, r: usize) -> Expr {
        field(x, (r as u32 * self.f.wp) as u8, self.wp())
    }
    fn pid(&self, x: Expr) -> Expr {
        field(x, (self.f.kp as u32 * self.f.wp) as u8, self.f.pid_bits as u8)
    }
    /// Present-tagged processor state.
    fn pack(&self, regs: Vec<Expr>, pid: Expr) -> Expr {
        let used = 1 + self.f.pid_bits + self.f.kp as u32 * self.f.wp;
        let mut parts = vec![(k(1), 1)];
        if self.f.w > used {
            parts.push((k(0), (self.f.w - used) as u8));
        }
        parts.push((pid, self.f.pid_bits as u8));
        for r in regs.into_iter().rev() {
            parts.push((r, self.wp()));
        }
        concat(parts)
    }
    fn max(&self, a: Expr, b: Expr) -> Expr {
        mux(leq(a.clone(), b.clone()), b, a)
    }
    /// Lifted conflict operator on two memory payloads.
    fn star(&self, op: StarOp, x: Expr, y: Expr) -> Expr {
        let wp = self.wp();
        let fx = field(x.clone(), wp, 1);
        let fy = field(y.clone(), wp, 1);
        let both = concat(vec![(k(1), 1), (op.expr(field(x.clone(), 0, wp), field(y.clone(), 0, wp), self.f.wp), wp)]);
        mux(and(fx.clone(), fy.clone()), both, mux(fx, x.clone(), mux(fy, y, x)))
    }
    /// A PRAM expression over the processor payload in `U`.
    fn lift(&self, e: &Expr) -> Expr {
        let wp = self.wp();
        let cut = |x: Expr| field(x, 0, wp);
        let l = |x: &Expr| self.lift(x);
        match e {
            Expr::Reg(r) => self.preg(reg(U), *r as usize),
            Expr::Const(v) => k(v & mask(self.f.wp)),
            Expr::Field(x, lo, width) => field(l(x), *lo, *width),
            Expr::Concat(parts) => concat(parts.iter().map(|(x, width)| (l(x), *width)).collect()),
            Expr::Shl(x, by) => cut(shl(l(x), *by)),
            Expr::Shr(x, by) => shr(l(x), *by),
            Expr::Add(a, b) => cut(add(l(a), l(b))),
            Expr::Sub(a, b) => cut(sub(l(a), l(b))),
            Expr::And(a, b) => and(l(a), l(b)),
            Expr::Or(a, b) => or(l(a), l(b)),
            Expr::Xor(a, b) => xor(l(a), l(b)),
            Expr::Not(a) => cut(not(l(a))),
            Expr::Eq(a, b) => eq(l(a), l(b)),
            Expr::Ltu(a, b) => ltu(l(a), l(b)),
            Expr::Leq(a, b) => leq(l(a), l(b)),
            Expr::Mux(c, t, f) => mux(l(c), l(t), l(f)),
            Expr::Label(name) => panic!("unresolved PRAM label {name}"),
        }
    }
    /// Registers after `t`, bumping the PC unless `t` sets it.
    fn lift_transform(&self, t: &Transform, bump: bool) -> Vec<Expr> {
        (0..self.f.kp)
            .map(|r| match t.assigns.iter().rev().find(|(x, _)| *x as usize == r) {
                Some((_, e)) => self.lift(e),
                None if r == PC as usize && bump => self.next_pc(),
                None => self.preg(reg(U), r),
            })
            .collect()
    }
    fn next_pc(&self) -> Expr {
        field(add(self.preg(reg(U), 0), k(1)), 0, self.wp())
    }
    /// Address the processor state `x` touches next.
    fn next_addr(&self, pram: &PramProgram, x: Expr) -> Expr {
        let mut e = k(0);
        for (i, ins) in pram.instrs.iter().enumerate().rev() {
            if let Some(r) = ins.address_reg() {
                e = mux(
                    eq(self.preg(x.clone(), 0), k(i as u64)),
                    field(self.preg(x.clone(), r as usize), 0, self.f.mem_bits as u8),
                    e,
                );
            }
        }
        e
    }
    /// Left-aligned `address ‖ pid` path of processor state `x`.
    fn path(&self, pram: &PramProgram, x: Expr) -> Expr {
        let mut parts = vec![
            (self.next_addr(pram, x.clone()), self.f.mem_bits as u8),
            (self.pid(x), self.f.pid_bits as u8),
        ];
        if self.f.w > self.f.depth() {
            parts.push((k(0), (self.f.w - self.f.depth()) as u8));
        }
        concat(parts)
    }
}

struct Gen<'a> {
    asm: Asm,
    fx: Fx,
    star: StarOp,
    pram: Option<&'a PramProgram>,
}

impl<'a> Gen<'a> {
    fn new(f: SimFormat, star: StarOp, pram: Option<&'a PramProgram>) -> Self {
        Gen {
            asm: Asm::new(REGS, f.w, f.a),
            fx: Fx { f },
            star,
            pram,
        }
    }

    fn settle(&self) -> u64 {
        6 * self.fx.f.depth() as u64 + 16
    }

    /// `H ← X0 ⊎ X1`. Returns through `RA` (0 means `ret H`).
    fn merge(&mut self) {
        let (a, x) = (&mut self.asm, &self.fx);
        a.label("merge");
        a.switch(vec![(x.is_e(reg(X0)), "mg_e0"), (x.is_e(reg(X1)), "mg_e1")], "mg_rd");
        a.label("mg_rd");
        a.read(X0, N);
        a.read(X1, N1);
        a.branch(x.is_leaf(reg(N)), "mg_leaf");
        a.fork(vec![(X0, x.hl(reg(N))), (X1, x.hl(reg(N1))), (RA, k(0))], "merge", TL);
        a.fork(vec![(X0, x.hr(reg(N))), (X1, x.hr(reg(N1))), (RA, k(0))], "merge", TR);
        let node = x.branch(
            x.max(x.dl(reg(N)), x.dl(reg(N1))),
            reg(TL),
            x.max(x.dr(reg(N)), x.dr(reg(N1))),
            reg(TR),
        );
        a.update(vec![(N, node)]);
        a.write(N, H);
        a.label("mg_exit");
        a.update(vec![(PC, mux(eq(reg(RA), k(0)), label("mg_ret"), reg(RA)))]);
        a.label("mg_ret");
        a.ret(H);
        a.label("mg_leaf");
        let v = x.star(self.star, x.payload(reg(N)), x.payload(reg(N1)));
        a.update(vec![(N, x.leaf(v))]);
        a.write(N, H);
        a.nop();
        a.jump("mg_exit");
        for (lbl, other) in [("mg_e0", X1), ("mg_e1", X0)] {
            a.label(lbl);
            a.update(vec![(H, reg(other))]);
            a.nops(5);
            a.jump("mg_exit");
        }
    }

    /// `H ← encode-path(X0, X1, payload N1)`: the left-aligned path in `X0`
    /// of length `X1`. Returns through `RA`.
    fn encode(&mut self) {
        let (a, x) = (&mut self.asm, &self.fx);
        let w = x.w();
        a.label("encode");
        a.branch(eq(reg(X1), k(0)), "en_leaf");
        a.fork(
            vec![(X0, shl(reg(X0), 1)), (X1, sub(reg(X1), k(1))), (RA, k(0))],
            "encode",
            TL,
        );
        let d = field(sub(reg(X1), k(1)), 0, x.db());
        let node = mux(
            field(reg(X0), w - 1, 1),
            x.branch(k(0), x.e(), d.clone(), reg(TL)),
            x.branch(d, reg(TL), k(0), x.e()),
        );
        a.update(vec![(N, node)]);
        a.write(N, H);
        a.label("en_exit");
        a.update(vec![(PC, mux(eq(reg(RA), k(0)), label("en_ret"), reg(RA)))]);
        a.label("en_ret");
        a.ret(H);
        a.label("en_leaf");
        a.update(vec![(N, x.leaf(reg(N1)))]);
        a.write(N, H);
        a.jump("en_exit");
    }

    /// Inline `(R0, R1) ← split(M)`. A leaf is copied twice with its write
    /// flag cleared.
    fn split(&mut self, tag: &str) {
        let (a, x) = (&mut self.asm, &self.fx);
        let l = |s: &str| format!("{tag}_{s}");
        a.switch(vec![(x.is_e(reg(M)), &l("e"))], &l("rd"));
        a.label(&l("rd"));
        a.read(M, N1);
        a.branch(x.is_leaf(reg(N1)), &l("leaf"));
        a.update(vec![(R0, x.hl(reg(N1))), (R1, x.hr(reg(N1)))]);
        a.nop();
        a.jump(&l("done"));
        a.label(&l("e"));
        a.update(vec![(R0, x.e()), (R1, x.e())]);
        a.nops(3);
        a.jump(&l("done"));
        a.label(&l("leaf"));
        a.update(vec![(N1, x.leaf(field(x.payload(reg(N1)), 0, x.wp())))]);
        a.write(N1, R0);
        a.write(N1, R1);
        a.label(&l("done"));
    }

    /// One PRAM step over memory tree `M` and processor tree `PR` at depth
    /// `LV`. Leaves the new trees in `M` and `PR`.
    fn step(&mut self) {
        let mem_bits = self.fx.f.mem_bits as u64;
        let drv = self.fx.f.driver_mark();
        {
            let (a, x) = (&mut self.asm, &self.fx);
            a.label("step");
            a.switch(vec![(x.is_e(reg(PR)), "st_empty")], "st_rd");
            a.label("st_rd");
            a.read(PR, N);
            a.branch(x.is_leaf(reg(N)), "st_leaf");
        }
        self.split("st_sp");
        let (a, x) = (&mut self.asm, &self.fx);
        // Shallow side: the empty one if any, else the left.
        let ls = or(
            x.is_e(x.hl(reg(N))),
            and(eq(x.is_e(x.hr(reg(N))), k(0)), leq(x.dl(reg(N)), x.dr(reg(N)))),
        );
        a.update(vec![(V, ls)]);
        a.fork(
            vec![
                (M, mux(reg(V), reg(R0), reg(R1))),
                (PR, mux(reg(V), x.hl(reg(N)), x.hr(reg(N)))),
                (LV, add(reg(LV), k(1))),
                (SP, x.e()),
                (RA, k(0)),
            ],
            "step",
            TL,
        );
        a.write(TL, TR);
        a.update(vec![(N1, x.frame(reg(V), reg(TR), reg(SP)))]);
        a.write(N1, SP);
        a.goto(
            vec![
                (M, mux(reg(V), reg(R1), reg(R0))),
                (PR, mux(reg(V), x.hr(reg(N)), x.hl(reg(N)))),
                (LV, add(reg(LV), k(1))),
            ],
            "step",
        );

        // Return from the inline deep call.
        a.label("st_join");
        a.read(SP, N1);
        let h = x.h();
        a.update(vec![
            (TR, field(reg(N1), h + 1, h)),
            (V, field(reg(N1), 2 * h + 1, 1)),
            (SP, field(reg(N1), 0, h + 1)),
            (LV, sub(reg(LV), k(1))),
        ]);
        a.read(TR, TL);
        a.update(vec![(R0, field(reg(TL), h, h)), (R1, field(reg(TL), 0, h))]);
        let left = |deep: Reg, shallow: Reg| mux(reg(V), reg(shallow), reg(deep));
        let right = |deep: Reg, shallow: Reg| mux(reg(V), reg(deep), reg(shallow));
        a.branch(ltu(reg(LV), k(mem_bits)), "jn_mb");
        a.goto(vec![(X0, left(M, R0)), (X1, right(M, R0)), (RA, label("jn_mm_back"))], "merge");
        a.label("jn_mm_back");
        a.goto(vec![(M, reg(H))], "jn_p");
        a.label("jn_mb");
        let d = |c: Expr| {
            mux(
                x.is_e(c),
                k(0),
                field(sub(k(mem_bits - 1), reg(LV)), 0, x.db()),
            )
        };
        let node = x.branch(d(left(M, R0)), left(M, R0), d(right(M, R0)), right(M, R0));
        a.update(vec![(N, node)]);
        a.write(N, M);
        a.nops(8);
        a.jump("jn_p");
        a.label("jn_p");
        a.goto(vec![(X0, left(PR, R1)), (X1, right(PR, R1)), (RA, label("jn_p_back"))], "merge");
        a.label("jn_p_back");
        a.goto(vec![(PR, reg(H))], "st_exit");

        a.label("st_exit");
        a.update(vec![(
            PC,
            mux(
                x.is_e(reg(SP)),
                label("st_ret"),
                mux(eq(reg(SP), k(drv)), label("drv_back"), label("st_join")),
            ),
        )]);
        a.label("st_ret");
        a.update(vec![(TL, x.pair(reg(M), reg(PR)))]);
        a.ret(TL);
        a.label("st_empty");
        a.jump("st_exit");

        // A processor meets its memory cell.
        a.label("st_leaf");
        a.update(vec![
            (U, x.payload(reg(N))),
            (PC, mux(x.is_e(reg(M)), label("lf_e"), label("lf_rd"))),
        ]);
        a.label("lf_rd");
        a.read(M, V);
        a.goto(vec![(V, field(x.payload(reg(V)), 0, x.wp() + 1))], "lf_h");
        a.label("lf_e");
        a.update(vec![(V, k(0))]);
        a.jump("lf_h");
        a.label("lf_h");
        self.handler();
        let (a, x) = (&mut self.asm, &self.fx);
        a.label("lf_w");
        a.update(vec![(N, x.leaf(reg(V)))]);
        a.write(N, M);
        self.encode_successor(R0, "p0");
        self.encode_successor(R1, "p1");
        let a = &mut self.asm;
        a.goto(vec![(X0, reg(R0)), (X1, reg(R1)), (RA, label("lf_mb"))], "merge");
        a.label("lf_mb");
        a.goto(vec![(PR, reg(H))], "st_exit");
    }

    /// `r ← encode-path(r)` if `r` holds a present state, else `r ← E`,
    /// in the same number of steps either way.
    fn encode_successor(&mut self, r: Reg, tag: &str) {
        let pram = self.pram.expect("step needs a PRAM program");
        let (a, x) = (&mut self.asm, &self.fx);
        let l = |s: &str| format!("{tag}_{s}");
        let present = field(reg(r), x.w() - 1, 1);
        a.update(vec![(PC, mux(present, label(&l("enc")), label(&l("skip"))))]);
        a.label(&l("enc"));
        a.goto(
            vec![
                (X0, x.path(pram, reg(r))),
                (X1, k(x.f.depth() as u64)),
                (N1, x.payload(reg(r))),
                (RA, label(&l("back"))),
            ],
            "encode",
        );
        a.label(&l("back"));
        a.goto(vec![(r, reg(H))], &l("next"));
        a.label(&l("skip"));
        a.nops(ENCODE_EXIT + 2);
        a.goto(vec![(r, x.e())], &l("next"));
        a.label(&l("next"));
    }

    /// Dispatch on the PRAM PC in `U` with memory payload `V`. Leaves the
    /// new memory payload in `V` and up to two successor states in `R0`,
    /// `R1`, then continues at `lf_w`. Every block takes `HLEN` steps.
    fn handler(&mut self) {
        let pram = self.pram.expect("step needs a PRAM program");
        let (a, x) = (&mut self.asm, &self.fx);
        let invalid = mask(x.f.w.min(32));
        let pc = x.preg(reg(U), 0);
        a.update(vec![(
            PC,
            mux(
                ltu(pc.clone(), k(pram.instrs.len() as u64)),
                add(label("h_table"), shl(pc, HLEN.trailing_zeros() as u8)),
                k(invalid),
            ),
        )]);
        a.label("h_table");
        let wp = x.wp();
        let readback = field(reg(V), 0, wp);
        let pid = x.pid(reg(U));
        for (i, ins) in pram.instrs.iter().enumerate() {
            let start = format!("h{i}");
            a.label(&start);
            let keep = |x: &Fx| x.lift_transform(&Transform::default(), true);
            let mut fin: Vec<(Reg, Expr)> = match ins {
                PramInstr::Update(t) => vec![
                    (R0, x.pack(x.lift_transform(t, !t.sets_pc()), pid.clone())),
                    (R1, k(0)),
                    (V, readback.clone()),
                ],
                PramInstr::Read { y, .. } => {
                    let mut regs = keep(x);
                    regs[*y as usize] = field(reg(V), 0, wp);
                    vec![(R0, x.pack(regs, pid.clone())), (R1, k(0)), (V, readback.clone())]
                }
                PramInstr::Write { y, .. } => vec![
                    (R0, x.pack(keep(x), pid.clone())),
                    (R1, k(0)),
                    (V, concat(vec![(k(1), 1), (x.preg(reg(U), *y as usize), wp)])),
                ],
                PramInstr::Input { x: r } => {
                    a.input(TL);
                    let mut regs = keep(x);
                    regs[*r as usize] = field(reg(TL), 0, wp);
                    vec![(R0, x.pack(regs, pid.clone())), (R1, k(0)), (V, readback.clone())]
                }
                PramInstr::Output { x: r } => {
                    a.update(vec![(TL, x.preg(reg(U), *r as usize))]);
                    a.output(TL);
                    vec![(R0, x.pack(keep(x), pid.clone())), (R1, k(0)), (V, readback.clone())]
                }
                PramInstr::Fork(t) => {
                    let p = x.f.pid_bits as u8;
                    let parent = field(shl(pid.clone(), 1), 0, p);
                    let child = field(or(shl(pid.clone(), 1), k(1)), 0, p);
                    vec![
                        (R0, x.pack(keep(x), parent)),
                        (R1, x.pack(x.lift_transform(t, false), child)),
                        (V, readback.clone()),
                        (PC, mux(field(pid.clone(), p - 1, 1), k(invalid), label("lf_w"))),
                    ]
                }
                PramInstr::Die => vec![(R0, k(0)), (R1, k(0)), (V, readback.clone())],
            };
            a.pad_from(&start, HLEN - 1);
            if !fin.iter().any(|(r, _)| *r == PC) {
                fin.push((PC, label("lf_w")));
            }
            a.update(fin);
        }
    }

    /// Reads every node of the tree in `X0` so no cell is left unread.
    fn clean(&mut self) {
        let (a, x) = (&mut self.asm, &self.fx);
        a.label("clean");
        a.switch(vec![(x.is_e(reg(X0)), "cl_done")], "cl_rd");
        a.label("cl_rd");
        a.read(X0, N);
        a.branch(x.is_leaf(reg(N)), "cl_done");
        a.fork(vec![(X0, x.hl(reg(N)))], "clean", TL);
        a.goto(vec![(X0, x.hr(reg(N)))], "clean");
        a.label("cl_done");
        a.ret(X0);
    }

    fn settle_then(&mut self, tag: &str, next: &str) {
        let a = &mut self.asm;
        let lp = format!("{tag}_wait");
        a.label(&lp);
        a.update(vec![
            (TL, sub(reg(TL), k(1))),
            (PC, mux(eq(reg(TL), k(1)), label(next), label(&lp))),
        ]);
    }
}

fn format_for(pram: &PramProgram, opts: &CompileOptions) -> Result<SimFormat, CompileError> {
    Ok(SimFormat::new(pram.w, pram.k, pram.addr_bits, opts.pid_bits, opts.psam_addr_bits)?)
}

/// Compiles `pram` into a PSAM program with the same input/output behavior
/// (for programs whose tape accesses never coincide within a step).
pub fn compile_pram_to_psam(pram: &PramProgram, star: StarOp, opts: CompileOptions) -> Result<CompiledPram, CompileError> {
    pram.validate().map_err(|e| CompileError::Pram(e.to_string()))?;
    if !star.is_commutative() {
        return Err(CompileError::NonCommutative(star));
    }
    let f = format_for(pram, &opts)?;
    let mut g = Gen::new(f, star, Some(pram));
    let settle = g.settle();
    let regs0 = vec![0; pram.k];
    let path0 = ((pram.next_address(&regs0) & mask(f.mem_bits)) << f.pid_bits | 1) << (f.w - f.depth());
    let payload0 = f.proc_payload(1, &regs0);
    {
        let a = &mut g.asm;
        a.goto(
            vec![
                (M, k(f.empty())),
                (X0, k(path0)),
                (X1, k(f.depth() as u64)),
                (N1, k(payload0)),
                (RA, label("d_init")),
            ],
            "encode",
        );
        a.label("d_init");
        a.update(vec![(PR, reg(H)), (TL, k(settle))]);
    }
    g.settle_then("d", "loop");
    {
        let (a, x) = (&mut g.asm, &g.fx);
        a.label("loop");
        a.switch(vec![(x.is_e(reg(PR)), "cleanup")], "d_step");
        a.label("d_step");
        a.goto(vec![(LV, k(0)), (SP, k(f.driver_mark()))], "step");
        a.label("drv_back");
        a.goto(vec![(TL, k(settle))], "d_wait");
        a.label("cleanup");
        a.goto(vec![(X0, reg(M))], "clean");
    }
    g.step();
    g.merge();
    g.encode();
    g.clean();
    let loop_pc = g.asm.label_pos("loop").expect("loop label") as u64;
    let program = g.asm.finish()?;
    Ok(CompiledPram {
        program,
        format: f,
        star,
        loop_pc,
        settle,
    })
}

/// Test harnesses around single routines. Each reads its arguments from the
/// input tape, outputs the result handles and returns; trees are then read
/// back with `decode_tree` once the machine is done.
pub mod harness {
    use super::*;

    /// Input: tree handle. Output: the two halves.
    pub fn split(f: SimFormat) -> Result<Program, CompileError> {
        let mut g = Gen::new(f, StarOp::Add, None);
        g.asm.input(M);
        g.split("sp");
        g.asm.output(R0);
        g.asm.output(R1);
        g.asm.ret(R0);
        Ok(g.asm.finish()?)
    }

    /// Input: two handles. Output: their union.
    pub fn merge(f: SimFormat, star: StarOp) -> Result<Program, CompileError> {
        let mut g = Gen::new(f, star, None);
        g.asm.input(X0);
        g.asm.input(X1);
        g.asm.goto(vec![(RA, label("back"))], "merge");
        g.asm.label("back");
        g.asm.output(H);
        g.asm.ret(H);
        g.merge();
        Ok(g.asm.finish()?)
    }

    /// Input: left-aligned path, length, payload. Output: the tree.
    pub fn encode(f: SimFormat) -> Result<Program, CompileError> {
        let mut g = Gen::new(f, StarOp::Add, None);
        g.asm.input(X0);
        g.asm.input(X1);
        g.asm.input(N1);
        g.asm.goto(vec![(RA, label("back"))], "encode");
        g.asm.label("back");
        g.asm.output(H);
        g.asm.ret(H);
        g.encode();
        Ok(g.asm.finish()?)
    }

    /// Input: memory and processor handles. Output: both after one PRAM
    /// step, settled.
    pub fn step(pram: &PramProgram, star: StarOp, opts: CompileOptions) -> Result<(Program, SimFormat), CompileError> {
        let f = format_for(pram, &opts)?;
        let mut g = Gen::new(f, star, Some(pram));
        let settle = g.settle();
        g.asm.input(M);
        g.asm.input(PR);
        g.asm.goto(vec![(LV, k(0)), (SP, k(f.driver_mark()))], "step");
        g.asm.label("drv_back");
        g.asm.update(vec![(TL, k(settle))]);
        g.settle_then("h", "out");
        g.asm.label("out");
        g.asm.output(M);
        g.asm.output(PR);
        g.asm.ret(M);
        g.step();
        g.merge();
        g.encode();
        Ok((g.asm.finish()?, f))
    }
}
