//! Compiles a PSAM program and a unit capacity `N` into one cyclic circuit:
//! `N` compute units glued together by a coordination bifilter, a memory
//! (two bifilters around a bipermute), and filtered input and output tapes.
//!
//! Every unit executes one instruction of one process. A unit activates its
//! successors by sending tagged states into the coordination bifilter, which
//! hands the `k`-th accepted state to unit `k + 1`; unit order is therefore
//! step-major, each process followed by the child it forked, matching the
//! interpreter's process order. A fork's return token is simply the wire
//! carrying the child's response, so pending values travel through
//! registers and memory without special handling.
//!
//! After the root returns, its unit starts a tree of burn units that use up
//! every remaining write, read, activation and tape slot. Burn requests
//! beyond a filter's capacity are masked, so the filters balance exactly
//! when the program fits. Filters are strict: a target left without a
//! request, or a real request left without a target, never resolves.

use std::collections::{BTreeMap, HashMap};

use crate::circuit::{evaluate, push_word, Circuit, CircuitBuilder, CircuitError, Evaluation, WireId};
use crate::gadgets::Bus;
use crate::routing::{build_bifilter, build_bipermute, build_filter, cap_surplus, Bit, Ops};

use super::isa::*;
use super::vm::Run;

/// Leading flag bits of a unit state: active, burn, root.
pub const STATE_FLAGS: usize = 3;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("capacity {0} must be a power of two and at least 4")]
    Capacity(usize),
    #[error("word width {w} cannot hold a {addr}-bit memory address")]
    AddressWidth { w: u32, addr: usize },
    #[error("compute unit needs {gates} gates (budget {budget})")]
    UnitBudget { gates: usize, budget: usize },
    #[error("input of {len} words exceeds the tape capacity {cap}")]
    InputTooLong { len: usize, cap: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthOptions {
    /// Number of compute units `N`.
    pub capacity: usize,
    /// Append burn behaviour after the root returns.
    pub burn: bool,
    /// Reject programs whose compute unit exceeds this many gates.
    pub unit_budget: Option<usize>,
}

impl SynthOptions {
    pub fn new(capacity: usize) -> Self {
        SynthOptions {
            capacity,
            burn: true,
            unit_budget: None,
        }
    }
}

/// Sizes of the synthesized machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MachineLayout {
    pub n: usize,
    pub w: usize,
    pub k: usize,
    /// Bits of a memory address; memory holds `n / 2` words.
    pub addr_bits: usize,
}

impl MachineLayout {
    pub fn new(program: &Program, n: usize) -> Result<Self, SynthError> {
        if !n.is_power_of_two() || n < 4 {
            return Err(SynthError::Capacity(n));
        }
        let addr_bits = (n / 2).trailing_zeros() as usize;
        if addr_bits > program.w as usize {
            return Err(SynthError::AddressWidth {
                w: program.w,
                addr: addr_bits,
            });
        }
        Ok(MachineLayout {
            n,
            w: program.w as usize,
            k: program.k,
            addr_bits,
        })
    }

    pub fn state_width(&self) -> usize {
        STATE_FLAGS + self.k * self.w
    }

    pub fn memory_words(&self) -> usize {
        self.n / 2
    }

    pub fn tape_words(&self) -> usize {
        self.n / 2
    }

    /// Input bits for a tape, padded with zero words.
    pub fn encode_tape(&self, input: &[u64]) -> Result<Vec<bool>, SynthError> {
        if input.len() > self.tape_words() {
            return Err(SynthError::InputTooLong {
                len: input.len(),
                cap: self.tape_words(),
            });
        }
        let mut bits = Vec::with_capacity(self.tape_words() * self.w);
        for i in 0..self.tape_words() {
            push_word(&mut bits, input.get(i).copied().unwrap_or(0) & mask(self.w as u32), self.w);
        }
        Ok(bits)
    }
}

/// Wires entering a compute unit. Buses are msb-first.
#[derive(Clone, Debug)]
pub struct UnitInputs {
    /// State received from the parent: flags then registers.
    pub from_parent: Bus,
    pub input_resp: Bus,
    /// Acceptance bit, then the address the write landed at.
    pub write_resp: Bus,
    pub read_resp: Bus,
    pub from_children: [Bus; 2],
}

/// Wires leaving a compute unit. Tagged buses lead with their tag bit.
#[derive(Clone, Debug)]
pub struct UnitOutputs {
    pub to_children: [Bus; 2],
    pub to_parent: Bus,
    pub input_req: WireId,
    pub output_req: Bus,
    pub write_req: Bus,
    pub read_req: Bus,
    /// Which requests the program itself makes, as opposed to burn filler.
    pub firm: FirmBits,
}

/// One wire per request stream; caps never drop a request whose firm bit
/// is set, so a program that outgrows the machine leaves wires stuck.
#[derive(Clone, Debug)]
pub struct FirmBits {
    pub children: [WireId; 2],
    pub input: WireId,
    pub output: WireId,
    pub write: WireId,
    pub read: WireId,
}

/// Builds a compute unit for `program`. It evaluates every instruction and
/// selects the effects of the one named by the PC.
pub fn build_compute_unit(
    b: &mut CircuitBuilder,
    program: &Program,
    layout: &MachineLayout,
    burn: bool,
    inp: &UnitInputs,
) -> UnitOutputs {
    let (w, kregs, a) = (layout.w, layout.k, layout.addr_bits);
    assert_eq!(inp.from_parent.len(), layout.state_width(), "unit state width");
    let mut ops = Ops::new(b);
    let p = ops.bits(&inp.from_parent);
    let (active, burning, root) = (p[0], p[1], p[2]);
    let regs: Vec<Vec<Bit>> = (0..kregs)
        .map(|r| p[STATE_FLAGS + r * w..STATE_FLAGS + (r + 1) * w].to_vec())
        .collect();
    let nburn = ops.not(burning);
    let real = ops.and(active, nburn);
    let bact = if burn { ops.and(active, burning) } else { Bit::C(false) };

    let sel = decode(&mut ops, real, &regs[PC as usize], program.instrs.len());
    let input_resp = ops.bits(&inp.input_resp);
    let write_resp = ops.bits(&inp.write_resp);
    let read_resp = ops.bits(&inp.read_resp);
    let child0 = ops.bits(&inp.from_children[0]);
    let child1 = ops.bits(&inp.from_children[1]);
    let write_addr = zero_extend(&write_resp[1..], w);

    let mut cx = Compiler {
        ops: &mut ops,
        w,
        memo: HashMap::new(),
    };
    let mut next: Vec<Acc> = (0..kregs).map(|_| Acc::new(w)).collect();
    let mut assigned: Vec<Acc> = (0..kregs).map(|_| Acc::new(1)).collect();
    let mut fork_regs: Vec<Acc> = (0..kregs).map(|_| Acc::new(w)).collect();
    let (mut is_ret, mut is_fork) = (Acc::new(1), Acc::new(1));
    let (mut is_read, mut is_write, mut is_in, mut is_out) = (Acc::new(1), Acc::new(1), Acc::new(1), Acc::new(1));
    let (mut wr_data, mut rd_addr, mut out_data, mut ret_val) = (Acc::new(w), Acc::new(a), Acc::new(w), Acc::new(w));

    for (i, ins) in program.instrs.iter().enumerate() {
        let s = sel[i];
        if s == Bit::C(false) {
            continue;
        }
        let mut ri = regs.clone();
        ri[PC as usize] = const_bits(i as u64, w);
        let mut set = |cx: &mut Compiler, r: Reg, v: &[Bit]| {
            next[r as usize].add(cx.ops, s, v);
            assigned[r as usize].add(cx.ops, s, &[Bit::C(true)]);
        };
        let bump = const_bits(i as u64 + 1, w);
        match ins {
            Instr::Update(t) => {
                let vals: Vec<(Reg, Vec<Bit>)> = t.assigns.iter().map(|(r, e)| (*r, cx.expr(e, &ri, i))).collect();
                for (r, v) in &vals {
                    set(&mut cx, *r, v);
                }
                if !t.sets_pc() {
                    set(&mut cx, PC, &bump);
                }
            }
            Instr::Read { x, y } => {
                is_read.add(cx.ops, s, &[Bit::C(true)]);
                rd_addr.add(cx.ops, s, &ri[*x as usize][w - a..]);
                set(&mut cx, *y, &read_resp);
                set(&mut cx, PC, &bump);
            }
            Instr::Write { x, y } => {
                is_write.add(cx.ops, s, &[Bit::C(true)]);
                wr_data.add(cx.ops, s, &ri[*x as usize]);
                set(&mut cx, *y, &write_addr);
                set(&mut cx, PC, &bump);
            }
            Instr::Input { x } => {
                is_in.add(cx.ops, s, &[Bit::C(true)]);
                set(&mut cx, *x, &input_resp);
                set(&mut cx, PC, &bump);
            }
            Instr::Output { x } => {
                is_out.add(cx.ops, s, &[Bit::C(true)]);
                out_data.add(cx.ops, s, &ri[*x as usize]);
                set(&mut cx, PC, &bump);
            }
            Instr::Fork { f, y } => {
                is_fork.add(cx.ops, s, &[Bit::C(true)]);
                let vals: Vec<(Reg, Vec<Bit>)> = f.assigns.iter().map(|(r, e)| (*r, cx.expr(e, &ri, i))).collect();
                let mut child = ri.clone();
                for (r, v) in vals {
                    child[r as usize] = v;
                }
                for (acc, v) in fork_regs.iter_mut().zip(&child) {
                    acc.add(cx.ops, s, v);
                }
                set(&mut cx, *y, &child1);
                set(&mut cx, PC, &bump);
            }
            Instr::Ret { x } => {
                is_ret.add(cx.ops, s, &[Bit::C(true)]);
                ret_val.add(cx.ops, s, &ri[*x as usize]);
            }
        }
    }
    let ops = cx.ops;
    let is_ret = is_ret.bit();
    let not_ret = ops.not(is_ret);
    let cont = ops.and(real, not_ret);
    let root_ret = if burn { ops.and(is_ret, root) } else { Bit::C(false) };
    let burn_out = ops.or(bact, root_ret);

    // Continuation state: unassigned registers carry over in real units.
    let mut state0 = vec![Bit::C(true), burn_out, ops.and(root, cont)];
    for (r, acc) in next.into_iter().enumerate() {
        let a_r = assigned[r].bit();
        let na = ops.not(a_r);
        let keep = ops.and(real, na);
        let mut v = acc.take();
        for (j, &old) in regs[r].iter().enumerate() {
            let kept = ops.and(keep, old);
            v[j] = ops.xor(v[j], kept);
        }
        state0.extend(v);
    }
    let t0 = {
        let c = ops.or(cont, root_ret);
        ops.or(c, bact)
    };
    let mut state1 = vec![Bit::C(true), burn_out, Bit::C(false)];
    for acc in fork_regs {
        state1.extend(acc.take());
    }
    let t1 = {
        let c = ops.or(is_fork.bit(), root_ret);
        ops.or(c, bact)
    };

    let mut to_parent = ret_val.take();
    for (j, &c) in child0.iter().enumerate() {
        let fwd = ops.and(cont, c);
        to_parent[j] = ops.xor(to_parent[j], fwd);
    }

    let wtag = ops.or(is_write.bit(), bact);
    let acc_bit = ops.and(bact, write_resp[0]);
    let rtag = ops.or(is_read.bit(), acc_bit);
    let mut raddr = rd_addr.take();
    for (j, &x) in write_resp[1..].iter().enumerate() {
        let own = ops.and(acc_bit, x);
        raddr[j] = ops.xor(raddr[j], own);
    }
    let itag = ops.or(is_in.bit(), bact);
    let otag = ops.or(is_out.bit(), bact);

    let tagged = |ops: &mut Ops<'_>, t: Bit, body: Vec<Bit>| {
        let mut v = vec![t];
        v.extend(body);
        ops.wires(&v)
    };
    UnitOutputs {
        to_children: [tagged(ops, t0, state0), tagged(ops, t1, state1)],
        to_parent: ops.wires(&to_parent),
        input_req: ops.wire(itag),
        output_req: tagged(ops, otag, out_data.take()),
        write_req: tagged(ops, wtag, wr_data.take()),
        read_req: tagged(ops, rtag, raddr),
        firm: FirmBits {
            children: [ops.wire(cont), ops.wire(is_fork.bit())],
            input: ops.wire(is_in.bit()),
            output: ops.wire(is_out.bit()),
            write: ops.wire(is_write.bit()),
            read: ops.wire(is_read.bit()),
        },
    }
}

/// XOR-accumulator of `select · value` terms. Selects are one-hot, so the
/// sum equals the selected value, and it resolves as soon as the selects
/// and the selected value do.
struct Acc {
    bits: Vec<Bit>,
}

impl Acc {
    fn new(width: usize) -> Self {
        Acc {
            bits: vec![Bit::C(false); width],
        }
    }

    fn add(&mut self, ops: &mut Ops<'_>, s: Bit, v: &[Bit]) {
        debug_assert_eq!(v.len(), self.bits.len());
        for (acc, &x) in self.bits.iter_mut().zip(v) {
            let t = ops.and(s, x);
            *acc = ops.xor(*acc, t);
        }
    }

    fn bit(&self) -> Bit {
        self.bits[0]
    }

    fn take(self) -> Vec<Bit> {
        self.bits
    }
}

fn const_bits(v: u64, w: usize) -> Vec<Bit> {
    (0..w).map(|i| Bit::C((v >> (w - 1 - i)) & 1 == 1)).collect()
}

fn zero_extend(x: &[Bit], w: usize) -> Vec<Bit> {
    let mut out = vec![Bit::C(false); w - x.len()];
    out.extend_from_slice(x);
    out
}

/// One-hot selects `en · (pc == i)` for `i < len`.
fn decode(ops: &mut Ops<'_>, en: Bit, pc: &[Bit], len: usize) -> Vec<Bit> {
    let w = pc.len();
    let low = (usize::BITS - (len.max(2) - 1).leading_zeros()) as usize;
    let low = low.min(w);
    let mut hz = en;
    for &x in &pc[..w - low] {
        let nx = ops.not(x);
        hz = ops.and(hz, nx);
    }
    // Products over the low bits, msb first, pruned to reachable prefixes.
    let mut prods = vec![hz];
    for (d, &x) in pc[w - low..].iter().enumerate() {
        let rest = low - d - 1;
        let nx = ops.not(x);
        let mut nextp = Vec::with_capacity(prods.len() * 2);
        for (v, &pr) in prods.iter().enumerate() {
            for bit in 0..2 {
                let value = (v << 1) | bit;
                if value << rest >= len {
                    break;
                }
                let lit = if bit == 1 { x } else { nx };
                nextp.push(ops.and(pr, lit));
            }
        }
        prods = nextp;
    }
    prods.resize(len, Bit::C(false));
    prods
}

/// Word-expression compiler over msb-first bit vectors, memoized within a
/// unit. Expressions that mention the PC are keyed by instruction, since
/// the PC is a constant inside each instruction's handler.
struct Compiler<'o, 'b> {
    ops: &'o mut Ops<'b>,
    w: usize,
    memo: HashMap<(Expr, Option<usize>), Vec<Bit>>,
}

fn mentions_pc(e: &Expr) -> bool {
    match e {
        Expr::Reg(r) => *r == PC,
        Expr::Const(_) | Expr::Label(_) => false,
        Expr::Field(x, ..) | Expr::Shl(x, _) | Expr::Shr(x, _) | Expr::Not(x) => mentions_pc(x),
        Expr::Concat(parts) => parts.iter().any(|(x, _)| mentions_pc(x)),
        Expr::Add(x, y)
        | Expr::Sub(x, y)
        | Expr::And(x, y)
        | Expr::Or(x, y)
        | Expr::Xor(x, y)
        | Expr::Eq(x, y)
        | Expr::Ltu(x, y)
        | Expr::Leq(x, y) => mentions_pc(x) || mentions_pc(y),
        Expr::Mux(c, t, f) => mentions_pc(c) || mentions_pc(t) || mentions_pc(f),
    }
}

impl Compiler<'_, '_> {
    /// Bit `j` counted from the lsb; zero beyond the word.
    fn lsb(&self, v: &[Bit], j: usize) -> Bit {
        if j < self.w {
            v[self.w - 1 - j]
        } else {
            Bit::C(false)
        }
    }

    fn from_lsb(&self, f: impl Fn(usize) -> Bit) -> Vec<Bit> {
        (0..self.w).rev().map(f).collect()
    }

    fn expr(&mut self, e: &Expr, regs: &[Vec<Bit>], pc: usize) -> Vec<Bit> {
        if let Expr::Reg(r) = e {
            return regs[*r as usize].clone();
        }
        let key = (e.clone(), mentions_pc(e).then_some(pc));
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let w = self.w;
        let v = match e {
            Expr::Reg(_) => unreachable!(),
            Expr::Const(c) => const_bits(c & mask(w as u32), w),
            Expr::Label(name) => panic!("unresolved label {name}"),
            Expr::Field(x, lo, width) => {
                let v = self.expr(x, regs, pc);
                let (lo, width) = (*lo as usize, *width as usize);
                self.from_lsb(|j| if j < width { self.lsb(&v, lo + j) } else { Bit::C(false) })
            }
            Expr::Concat(parts) => {
                let mut lsbs = Vec::new();
                for (x, width) in parts.iter().rev() {
                    let v = self.expr(x, regs, pc);
                    for j in 0..*width as usize {
                        lsbs.push(self.lsb(&v, j));
                    }
                }
                self.from_lsb(|j| lsbs.get(j).copied().unwrap_or(Bit::C(false)))
            }
            Expr::Shl(x, by) => {
                let v = self.expr(x, regs, pc);
                let by = *by as usize;
                self.from_lsb(|j| if j >= by { self.lsb(&v, j - by) } else { Bit::C(false) })
            }
            Expr::Shr(x, by) => {
                let v = self.expr(x, regs, pc);
                self.from_lsb(|j| self.lsb(&v, j + *by as usize))
            }
            Expr::Not(x) => {
                let v = self.expr(x, regs, pc);
                v.iter().map(|&b| self.ops.not(b)).collect()
            }
            Expr::Mux(c, t, f) => {
                let c = self.expr(c, regs, pc);
                let s = c[w - 1];
                let t = self.expr(t, regs, pc);
                let f = self.expr(f, regs, pc);
                let ns = self.ops.not(s);
                f.iter().zip(&t).map(|(&x, &y)| self.ops.mux(s, ns, x, y)).collect()
            }
            Expr::Add(x, y)
            | Expr::Sub(x, y)
            | Expr::And(x, y)
            | Expr::Or(x, y)
            | Expr::Xor(x, y)
            | Expr::Eq(x, y)
            | Expr::Ltu(x, y)
            | Expr::Leq(x, y) => {
                let u = self.expr(x, regs, pc);
                let v = self.expr(y, regs, pc);
                self.binary(e, &u, &v)
            }
        };
        self.memo.insert(key, v.clone());
        v
    }

    fn binary(&mut self, e: &Expr, u: &[Bit], v: &[Bit]) -> Vec<Bit> {
        let ops = &mut *self.ops;
        let flag = |b: Bit, w: usize| {
            let mut out = vec![Bit::C(false); w];
            out[w - 1] = b;
            out
        };
        match e {
            Expr::Add(..) => add_carry(ops, u, v, Bit::C(false)),
            Expr::Sub(..) => {
                let nv: Vec<Bit> = v.iter().map(|&b| ops.not(b)).collect();
                add_carry(ops, u, &nv, Bit::C(true))
            }
            Expr::And(..) => u.iter().zip(v).map(|(&x, &y)| ops.and(x, y)).collect(),
            Expr::Or(..) => u.iter().zip(v).map(|(&x, &y)| ops.or(x, y)).collect(),
            Expr::Xor(..) => u.iter().zip(v).map(|(&x, &y)| ops.xor(x, y)).collect(),
            Expr::Eq(..) => {
                let mut terms: Vec<Bit> = u
                    .iter()
                    .zip(v)
                    .map(|(&x, &y)| {
                        let d = ops.xor(x, y);
                        ops.not(d)
                    })
                    .collect();
                while terms.len() > 1 {
                    terms = terms
                        .chunks(2)
                        .map(|c| if c.len() == 2 { ops.and(c[0], c[1]) } else { c[0] })
                        .collect();
                }
                flag(terms[0], self.w)
            }
            Expr::Ltu(..) => flag(less(ops, u, v, Bit::C(false)), self.w),
            Expr::Leq(..) => flag(less(ops, u, v, Bit::C(true)), self.w),
            _ => unreachable!("not a binary operator"),
        }
    }
}

/// `u + v + cin`, truncated, msb-first.
fn add_carry(ops: &mut Ops<'_>, u: &[Bit], v: &[Bit], cin: Bit) -> Vec<Bit> {
    let n = u.len();
    let mut out = vec![Bit::C(false); n];
    let mut carry = cin;
    for i in (0..n).rev() {
        let xc = ops.xor(u[i], carry);
        let yc = ops.xor(v[i], carry);
        out[i] = ops.xor(xc, v[i]);
        let t = ops.and(xc, yc);
        carry = ops.xor(t, carry);
    }
    out
}

/// `u < v`, or `u ≤ v` when `eq` is 1; scanned from the lsb so the most
/// significant difference decides.
fn less(ops: &mut Ops<'_>, u: &[Bit], v: &[Bit], eq: Bit) -> Bit {
    let mut lt = eq;
    for i in (0..u.len()).rev() {
        let d = ops.xor(u[i], v[i]);
        let nd = ops.not(d);
        lt = ops.mux(d, nd, lt, v[i]);
    }
    lt
}

/// Memory with `n` request slots and `n / 2` words:
/// `(write_resps, read_resps)` for tagged write and read requests.
pub fn build_memory(b: &mut CircuitBuilder, write_reqs: &[Bus], read_reqs: &[Bus], w: usize) -> (Vec<Bus>, Vec<Bus>) {
    let n = write_reqs.len();
    assert_eq!(read_reqs.len(), n, "memory: request counts differ");
    let half = n / 2;
    let a = half.trailing_zeros() as usize;
    let slots: Vec<Bus> = (0..half)
        .map(|k| {
            let mut bits = vec![true];
            push_word(&mut bits, k as u64, a);
            bits.iter().map(|&x| if x { b.one() } else { b.zero() }).collect()
        })
        .collect();
    let (write_resps, writes) = build_bifilter(b, write_reqs, &slots, w, 1 + a);
    let reads = b.reserve_bus(half * w);
    let read_words: Vec<Bus> = reads.chunks(w).map(|c| c.to_vec()).collect();
    let (read_resps, addresses) = build_bifilter(b, read_reqs, &read_words, a, w);
    let pulled = build_bipermute(b, &addresses, &writes, w);
    for (r, p) in read_words.iter().zip(&pulled) {
        b.connect_bus(r, p);
    }
    (write_resps, read_resps)
}

/// Tag wires of every filter, after capping.
#[derive(Clone, Debug, Default)]
pub struct FilterTags {
    pub coordination: Vec<WireId>,
    pub write: Vec<WireId>,
    pub read: Vec<WireId>,
    pub input: Vec<WireId>,
    pub output: Vec<WireId>,
}

/// A synthesized machine and the wires needed to audit it.
pub struct PsamCircuit {
    pub circuit: Circuit,
    pub layout: MachineLayout,
    pub tags: FilterTags,
    /// Per unit, the state wires received from its parent.
    pub from_parent: Vec<Bus>,
}

fn replace_tag(b: &mut CircuitBuilder, reqs: &mut [Bus], firm: &[WireId], cap: usize) -> Vec<WireId> {
    let raw: Vec<WireId> = reqs.iter().map(|r| r[0]).collect();
    let capped = cap_surplus(b, &raw, firm, cap);
    for (r, t) in reqs.iter_mut().zip(&capped) {
        r[0] = *t;
    }
    capped
}

/// Builds the whole machine for `program` with `opts.capacity` units.
/// Inputs are `N/2` tape words; outputs are the `N/2`-word output tape.
pub fn synthesize(program: &Program, opts: &SynthOptions) -> Result<PsamCircuit, SynthError> {
    let layout = MachineLayout::new(program, opts.capacity)?;
    let (n, w, a) = (layout.n, layout.w, layout.addr_bits);
    let sw = layout.state_width();
    let mut b = CircuitBuilder::new();

    b.region("input-tape");
    let tape: Vec<Bus> = (0..layout.tape_words()).map(|_| (0..w).map(|_| b.input()).collect()).collect();

    b.region("ports");
    let mut ins = Vec::with_capacity(n);
    for u in 0..n {
        let from_parent = if u == 0 {
            let mut s = vec![b.one(), b.zero(), b.one()];
            s.extend(std::iter::repeat_n(b.zero(), layout.k * w));
            s
        } else {
            b.reserve_bus(sw)
        };
        ins.push(UnitInputs {
            from_parent,
            input_resp: b.reserve_bus(w),
            write_resp: b.reserve_bus(1 + a),
            read_resp: b.reserve_bus(w),
            from_children: [b.reserve_bus(w), b.reserve_bus(w)],
        });
    }

    b.region("units");
    let mut outs = Vec::with_capacity(n);
    for (u, inp) in ins.iter().enumerate() {
        let before = b.len();
        outs.push(build_compute_unit(&mut b, program, &layout, opts.burn, inp));
        if let (Some(budget), 1) = (opts.unit_budget, u) {
            let gates = b.len() - before;
            if gates > budget {
                return Err(SynthError::UnitBudget { gates, budget });
            }
        }
    }

    b.region("coordination");
    let mut coord: Vec<Bus> = outs.iter().flat_map(|o| o.to_children.iter().cloned()).collect();
    let firm: Vec<WireId> = outs.iter().flat_map(|o| o.firm.children).collect();
    let coord_tags = replace_tag(&mut b, &mut coord, &firm, n);
    let mut replies: Vec<Bus> = outs[1..].iter().map(|o| o.to_parent.clone()).collect();
    replies.push(vec![b.zero(); w]);
    let (child_resps, states) = build_bifilter(&mut b, &coord, &replies, sw, w);
    for (u, inp) in ins.iter().enumerate() {
        b.connect_bus(&inp.from_children[0], &child_resps[2 * u]);
        b.connect_bus(&inp.from_children[1], &child_resps[2 * u + 1]);
        if u > 0 {
            b.connect_bus(&inp.from_parent, &states[u - 1]);
        }
    }

    b.region("memory");
    let mut wreqs: Vec<Bus> = outs.iter().map(|o| o.write_req.clone()).collect();
    let mut rreqs: Vec<Bus> = outs.iter().map(|o| o.read_req.clone()).collect();
    let firm: Vec<WireId> = outs.iter().map(|o| o.firm.write).collect();
    let write_tags = replace_tag(&mut b, &mut wreqs, &firm, n / 2);
    let firm: Vec<WireId> = outs.iter().map(|o| o.firm.read).collect();
    let read_tags = replace_tag(&mut b, &mut rreqs, &firm, n / 2);
    let (wresps, rresps) = build_memory(&mut b, &wreqs, &rreqs, w);
    for (inp, (wr, rr)) in ins.iter().zip(wresps.iter().zip(&rresps)) {
        b.connect_bus(&inp.write_resp, wr);
        b.connect_bus(&inp.read_resp, rr);
    }

    b.region("input-filter");
    let raw: Vec<WireId> = outs.iter().map(|o| o.input_req).collect();
    let firm: Vec<WireId> = outs.iter().map(|o| o.firm.input).collect();
    let input_tags = cap_surplus(&mut b, &raw, &firm, n / 2);
    let ireqs: Vec<Bus> = input_tags.iter().map(|&t| vec![t]).collect();
    let (iresps, _) = build_bifilter(&mut b, &ireqs, &tape, 0, w);
    for (inp, r) in ins.iter().zip(&iresps) {
        b.connect_bus(&inp.input_resp, r);
    }

    b.region("output-filter");
    let mut oreqs: Vec<Bus> = outs.iter().map(|o| o.output_req.clone()).collect();
    let firm: Vec<WireId> = outs.iter().map(|o| o.firm.output).collect();
    let output_tags = replace_tag(&mut b, &mut oreqs, &firm, n / 2);
    for word in build_filter(&mut b, &oreqs, w) {
        for x in word {
            b.output(x);
        }
    }

    let from_parent = ins.into_iter().map(|i| i.from_parent).collect();
    Ok(PsamCircuit {
        circuit: b.finalize()?,
        layout,
        tags: FilterTags {
            coordination: coord_tags,
            write: write_tags,
            read: read_tags,
            input: input_tags,
            output: output_tags,
        },
        from_parent,
    })
}

/// Unresolved wires of an evaluation, counted per subcircuit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResolutionReport {
    pub stuck: BTreeMap<String, usize>,
}

impl ResolutionReport {
    pub fn is_clean(&self) -> bool {
        self.stuck.is_empty()
    }

    pub fn total(&self) -> usize {
        self.stuck.values().sum()
    }

    pub fn render(&self) -> String {
        if self.is_clean() {
            return "resolved: no stuck wires\n".to_string();
        }
        let mut s = format!("stuck wires: {}\n", self.total());
        for (region, count) in &self.stuck {
            s.push_str(&format!("  {region}: {count}\n"));
        }
        s
    }
}

pub fn resolution_report(circuit: &Circuit, e: &Evaluation) -> ResolutionReport {
    let mut stuck = BTreeMap::new();
    for wire in e.unresolved() {
        *stuck.entry(circuit.region_of(wire).to_string()).or_insert(0) += 1;
    }
    ResolutionReport { stuck }
}

/// Evaluates `circuit` on `input` and reports unresolved wires by region.
pub fn validate_resolution(circuit: &Circuit, input: &[bool]) -> Result<ResolutionReport, CircuitError> {
    let e = evaluate(circuit, input)?;
    Ok(resolution_report(circuit, &e))
}

/// Result of running a synthesized machine.
#[derive(Clone, Debug)]
pub struct CircuitRun {
    /// The full output tape, or `None` when some output wire is stuck.
    pub output: Option<Vec<u64>>,
    pub report: ResolutionReport,
    /// Largest delay over the output wires.
    pub delay: Option<u32>,
}

impl PsamCircuit {
    pub fn evaluate(&self, input: &[u64]) -> Result<(Evaluation, CircuitRun), SynthError> {
        let bits = self.layout.encode_tape(input)?;
        let e = evaluate(&self.circuit, &bits)?;
        let outs = self.circuit.outputs();
        let output = outs.chunks(self.layout.w).map(|c| e.word(c)).collect::<Option<Vec<u64>>>();
        let delay = e.max_delay(outs);
        let report = resolution_report(&self.circuit, &e);
        Ok((e, CircuitRun { output, report, delay }))
    }

    pub fn run(&self, input: &[u64]) -> Result<CircuitRun, SynthError> {
        Ok(self.evaluate(input)?.1)
    }

    /// Checks that each activated unit's control state (flags and PC)
    /// resolves strictly after the tag of the slot that activated it. Returns the number of
    /// activations checked, or the first unit that violates the order.
    pub fn check_causality(&self, e: &Evaluation) -> Result<usize, usize> {
        let accepted: Vec<usize> = self
            .tags
            .coordination
            .iter()
            .enumerate()
            .filter(|(_, &t)| e.bit(t) == Some(true))
            .map(|(i, _)| i)
            .collect();
        let mut checked = 0;
        for (k, &slot) in accepted.iter().enumerate() {
            let unit = k + 1;
            if unit >= self.layout.n {
                break;
            }
            let tag = e.delay(self.tags.coordination[slot]);
            let got = e.max_delay(&self.from_parent[unit][..STATE_FLAGS + self.layout.w]);
            match (tag, got) {
                (Some(t), Some(g)) if g > t => checked += 1,
                _ => return Err(unit),
            }
        }
        Ok(checked)
    }
}

/// Smallest power-of-two capacity that fits an interpreter run: every
/// filter must take the run's real requests, and the `N − W` burn units must
/// make up the rest of each resource class.
pub fn required_capacity(run: &Run, input_len: usize) -> usize {
    let t = &run.trace;
    let writes = t.cells.len();
    let inputs = t.inputs_consumed as usize;
    let outputs = run.output().map_or(0, |o| o.len());
    let slots = writes.max(inputs).max(input_len).max(outputs);
    let spare = writes.min(inputs).min(outputs);
    let need = (2 * slots).max(2 * (t.work as usize).saturating_sub(spare)).max(4);
    need.next_power_of_two()
}
