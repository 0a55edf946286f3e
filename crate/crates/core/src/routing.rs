//! Dynamic routing networks: partition-at, merge, partition, permute,
//! filter, and the bidirectional bipermute and bifilter.
//!
//! Every network routes words by conditional swaps whose controls depend
//! only on words to the element's left, so a prefix of the input is routed
//! before the rest resolves. The bidirectional networks reuse the forward
//! swap controls to carry a response back from target to source.

use crate::circuit::{CircuitBuilder, Evaluation, GateKind, WireId};
use crate::gadgets::Bus;

/// A bit that is either a known constant or a wire; lets the generators
/// skip gates whose inputs are fixed at construction time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Bit {
    C(bool),
    W(WireId),
}

pub(crate) struct Ops<'a> {
    pub b: &'a mut CircuitBuilder,
    zero: Option<WireId>,
    one: Option<WireId>,
}

impl<'a> Ops<'a> {
    pub fn new(b: &'a mut CircuitBuilder) -> Self {
        Ops {
            b,
            zero: None,
            one: None,
        }
    }

    /// Recognizes the builder's shared constant wires.
    pub fn bit(&mut self, w: WireId) -> Bit {
        if self.one.is_none() {
            self.one = Some(self.b.one());
            self.zero = Some(self.b.zero());
        }
        if Some(w) == self.one {
            Bit::C(true)
        } else if Some(w) == self.zero {
            Bit::C(false)
        } else {
            Bit::W(w)
        }
    }

    pub fn bits(&mut self, bus: &[WireId]) -> Vec<Bit> {
        bus.iter().map(|&w| self.bit(w)).collect()
    }

    pub fn wire(&mut self, x: Bit) -> WireId {
        match x {
            Bit::C(true) => self.b.one(),
            Bit::C(false) => self.b.zero(),
            Bit::W(w) => w,
        }
    }

    pub fn wires(&mut self, xs: &[Bit]) -> Bus {
        xs.iter().map(|&x| self.wire(x)).collect()
    }

    pub fn xor(&mut self, x: Bit, y: Bit) -> Bit {
        match (x, y) {
            (Bit::C(a), Bit::C(b)) => Bit::C(a ^ b),
            (Bit::C(false), o) | (o, Bit::C(false)) => o,
            (Bit::C(true), o) | (o, Bit::C(true)) => self.not(o),
            (Bit::W(a), Bit::W(b)) => Bit::W(self.b.xor(a, b)),
        }
    }

    pub fn and(&mut self, x: Bit, y: Bit) -> Bit {
        match (x, y) {
            (Bit::C(false), _) | (_, Bit::C(false)) => Bit::C(false),
            (Bit::C(true), o) | (o, Bit::C(true)) => o,
            (Bit::W(a), Bit::W(b)) => Bit::W(self.b.and(a, b)),
        }
    }

    pub fn not(&mut self, x: Bit) -> Bit {
        match x {
            Bit::C(v) => Bit::C(!v),
            Bit::W(w) => Bit::W(self.b.not(w)),
        }
    }

    pub fn or(&mut self, x: Bit, y: Bit) -> Bit {
        match (x, y) {
            (Bit::C(true), _) | (_, Bit::C(true)) => Bit::C(true),
            (Bit::C(false), o) | (o, Bit::C(false)) => o,
            (Bit::W(a), Bit::W(b)) => Bit::W(self.b.or(a, b)),
        }
    }

    /// `x` when `s = 0`, `y` when `s = 1`; `ns` is `¬s`.
    pub fn mux(&mut self, s: Bit, ns: Bit, x: Bit, y: Bit) -> Bit {
        match s {
            Bit::C(false) => return x,
            Bit::C(true) => return y,
            Bit::W(_) => {}
        }
        if x == y {
            return x;
        }
        let l = self.and(ns, x);
        let r = self.and(s, y);
        self.xor(l, r)
    }

    /// Conditional swap. The terms carrying `x` are XORed with the
    /// always-zero `s·¬s`, which resolves only after the control does; this
    /// keeps an output from resolving early because an unrelated word
    /// happened to arrive early with a matching zero bit.
    pub fn swap(&mut self, s: Bit, x: &[Bit], y: &[Bit]) -> (Vec<Bit>, Vec<Bit>) {
        debug_assert_eq!(x.len(), y.len());
        match s {
            Bit::C(false) => return (x.to_vec(), y.to_vec()),
            Bit::C(true) => return (y.to_vec(), x.to_vec()),
            Bit::W(_) => {}
        }
        let ns = self.not(s);
        let mut z = None;
        let mut a = Vec::with_capacity(x.len());
        let mut c = Vec::with_capacity(x.len());
        for (&xi, &yi) in x.iter().zip(y) {
            if xi == yi {
                a.push(xi);
                c.push(xi);
                continue;
            }
            let (mut ax, mut cx) = (self.and(ns, xi), self.and(s, xi));
            if matches!(yi, Bit::W(_)) {
                let z = *z.get_or_insert_with(|| self.and(s, ns));
                ax = self.xor(ax, z);
                cx = self.xor(cx, z);
            }
            let ay = self.and(s, yi);
            let cy = self.and(ns, yi);
            a.push(self.xor(ax, ay));
            c.push(self.xor(cy, cx));
        }
        (a, c)
    }

    /// Ripple-carry sum, carry first, built lsb upward.
    pub fn add(&mut self, x: &[Bit], y: &[Bit]) -> Vec<Bit> {
        debug_assert_eq!(x.len(), y.len());
        let n = x.len();
        let mut out = vec![Bit::C(false); n + 1];
        let mut carry = Bit::C(false);
        for i in (0..n).rev() {
            let xc = self.xor(x[i], carry);
            let yc = self.xor(y[i], carry);
            out[i + 1] = self.xor(xc, y[i]);
            let t = self.and(xc, yc);
            carry = self.xor(t, carry);
        }
        out[0] = carry;
        out
    }
}

/// An element travelling through a network, labelled with the edge it
/// currently occupies so the response path can retrace it.
#[derive(Clone, Debug)]
struct Elem {
    bits: Vec<Bit>,
    edge: u32,
}

struct SwapRec {
    s: Bit,
    ins: [u32; 2],
    outs: [u32; 2],
}

struct Net<'a, 'b> {
    ops: &'a mut Ops<'b>,
    log: Option<Vec<SwapRec>>,
    next_edge: u32,
}

impl<'a, 'b> Net<'a, 'b> {
    fn new(ops: &'a mut Ops<'b>, record: bool, sources: usize) -> Self {
        Net {
            ops,
            log: record.then(Vec::new),
            next_edge: sources as u32,
        }
    }

    fn swap(&mut self, s: Bit, x: Elem, y: Elem) -> (Elem, Elem) {
        let (a, c) = self.ops.swap(s, &x.bits, &y.bits);
        match s {
            Bit::C(false) => (Elem { bits: a, edge: x.edge }, Elem { bits: c, edge: y.edge }),
            Bit::C(true) => (Elem { bits: a, edge: y.edge }, Elem { bits: c, edge: x.edge }),
            Bit::W(_) => {
                let (e0, e1) = (self.next_edge, self.next_edge + 1);
                self.next_edge += 2;
                if let Some(log) = &mut self.log {
                    log.push(SwapRec {
                        s,
                        ins: [x.edge, y.edge],
                        outs: [e0, e1],
                    });
                }
                (Elem { bits: a, edge: e0 }, Elem { bits: c, edge: e1 })
            }
        }
    }

    /// Returns the msb-0 count (when `need_count`) and the bitonic output.
    fn partition_at(&mut self, i: &[Bit], x: Vec<Elem>, need_count: bool) -> (Vec<Bit>, Vec<Elem>) {
        let n = x.len();
        if n == 1 {
            let zeros = if need_count { vec![self.ops.not(x[0].bits[0])] } else { Vec::new() };
            return (zeros, x);
        }
        let mut xl = x;
        let xr = xl.split_off(n / 2);
        let (zl, yl) = self.partition_at(&i[1..], xl, true);
        let shifted = self.ops.add(i, &zl);
        let (zr, yr) = self.partition_at(&shifted[2..], xr, need_count);
        let (mut a, c) = self.merge(i[0], Bit::C(false), Bit::C(false), &i[1..], yl, yr);
        a.extend(c);
        let zeros = if need_count { self.ops.add(&zl, &zr) } else { Vec::new() };
        (zeros, a)
    }

    fn merge(&mut self, parity: Bit, left: Bit, right: Bit, i: &[Bit], x: Vec<Elem>, y: Vec<Elem>) -> (Vec<Elem>, Vec<Elem>) {
        let m = x.len();
        if m == 1 {
            let pl = self.ops.xor(parity, left);
            let s = self.ops.xor(pl, x[0].bits[0]);
            let (a, c) = self.swap(s, x.into_iter().next().unwrap(), y.into_iter().next().unwrap());
            return (vec![a], vec![c]);
        }
        let mut xl = x;
        let xr = xl.split_off(m / 2);
        let mut yl = y;
        let yr = yl.split_off(m / 2);
        let nr = self.ops.not(right);
        let t = self.ops.and(i[0], nr);
        let left_l = self.ops.or(left, t);
        let ni = self.ops.not(i[0]);
        let nl = self.ops.not(left);
        let u = self.ops.and(ni, nl);
        let right_r = self.ops.or(right, u);
        let (mut zl, mut wl) = self.merge(parity, left_l, right, &i[1..], xl, yl);
        let (zr, wr) = self.merge(parity, left, right_r, &i[1..], xr, yr);
        zl.extend(zr);
        wl.extend(wr);
        (zl, wl)
    }

    /// msb-0 elements in order, then msb-1 elements in order, msbs dropped.
    fn partition(&mut self, x: Vec<Elem>) -> (Vec<Elem>, Vec<Elem>) {
        let ((zl, _), (zr, _)) = self.partition_tagged(x);
        (zl, zr)
    }

    /// Like `partition`, also returning the dropped msb of each output. With
    /// exactly half the msbs set these are all 0 on the left, 1 on the right.
    #[allow(clippy::type_complexity)]
    fn partition_tagged(&mut self, x: Vec<Elem>) -> ((Vec<Elem>, Vec<Bit>), (Vec<Elem>, Vec<Bit>)) {
        let n = x.len();
        let log = n.trailing_zeros() as usize;
        let i = vec![Bit::C(false); log];
        let (_, z) = self.partition_at(&i, x, false);
        let mut zl = z;
        let mut zr = zl.split_off(n / 2);
        zr.reverse();
        let strip = |v: &mut Vec<Elem>| v.iter_mut().map(|e| e.bits.remove(0)).collect::<Vec<Bit>>();
        let tl = strip(&mut zl);
        let tr = strip(&mut zr);
        ((zl, tl), (zr, tr))
    }

    fn permute(&mut self, x: Vec<Elem>) -> Vec<Elem> {
        if x.len() == 1 {
            return x;
        }
        let (x0, x1) = self.partition(x);
        let mut out = self.permute(x0);
        out.extend(self.permute(x1));
        out
    }

    /// Carries `responses` (indexed by edge) back to the sources.
    fn respond(&mut self, mut back: Vec<Option<Vec<Bit>>>, sources: usize) -> Vec<Vec<Bit>> {
        let log = self.log.take().expect("response path needs a recorded network");
        for rec in log.iter().rev() {
            let o0 = back[rec.outs[0] as usize].take().expect("response missing on edge");
            let o1 = back[rec.outs[1] as usize].take().expect("response missing on edge");
            let (i0, i1) = self.ops.swap(rec.s, &o0, &o1);
            back[rec.ins[0] as usize] = Some(i0);
            back[rec.ins[1] as usize] = Some(i1);
        }
        back.truncate(sources);
        back.into_iter()
            .map(|r| r.expect("source without response"))
            .collect()
    }
}

fn log2_exact(n: usize, what: &str) -> usize {
    assert!(n.is_power_of_two(), "{what}: n = {n} is not a power of two");
    n.trailing_zeros() as usize
}

fn elems(ops: &mut Ops<'_>, x: &[Bus], width: usize, what: &str) -> Vec<Elem> {
    x.iter()
        .enumerate()
        .map(|(k, bus)| {
            assert_eq!(bus.len(), width, "{what}: element {k} has width {} (expected {width})", bus.len());
            Elem {
                bits: ops.bits(bus),
                edge: k as u32,
            }
        })
        .collect()
}

fn out_buses(ops: &mut Ops<'_>, x: &[Elem]) -> Vec<Bus> {
    x.iter().map(|e| ops.wires(&e.bits)).collect()
}

/// Places msb-0 words consecutively from position `i` (wrapping), in their
/// original order; msb-1 words fill the rest in reverse order. Also returns
/// the count of msb-0 words on `log n + 1` bits.
pub fn build_partition_at(b: &mut CircuitBuilder, i: &[WireId], x: &[Bus], w: usize) -> (Bus, Vec<Bus>) {
    let log = log2_exact(x.len(), "partition-at");
    assert_eq!(i.len(), log, "partition-at: index must have log n bits");
    let mut ops = Ops::new(b);
    let ib = ops.bits(i);
    let xs = elems(&mut ops, x, w, "partition-at");
    let mut net = Net::new(&mut ops, false, x.len());
    let (zeros, y) = net.partition_at(&ib, xs, true);
    let zeros = ops.wires(&zeros);
    let y = out_buses(&mut ops, &y);
    (zeros, y)
}

/// The half-cleaner step used by partition-at, exposed for testing. `x` and
/// `y` hold `m` words each; the base swap control is `parity ⊕ left ⊕ x.msb`.
pub fn build_merge(
    b: &mut CircuitBuilder,
    parity: WireId,
    left: WireId,
    right: WireId,
    i: &[WireId],
    x: &[Bus],
    y: &[Bus],
    w: usize,
) -> (Vec<Bus>, Vec<Bus>) {
    let log = log2_exact(x.len(), "merge");
    assert_eq!(x.len(), y.len(), "merge: halves differ in length");
    assert_eq!(i.len(), log, "merge: index must have log m bits");
    let mut ops = Ops::new(b);
    let (p, l, r) = (ops.bit(parity), ops.bit(left), ops.bit(right));
    let ib = ops.bits(i);
    let xs = elems(&mut ops, x, w, "merge");
    let ys = elems(&mut ops, y, w, "merge");
    let mut net = Net::new(&mut ops, false, 0);
    let (z, v) = net.merge(p, l, r, &ib, xs, ys);
    let z = out_buses(&mut ops, &z);
    let v = out_buses(&mut ops, &v);
    (z, v)
}

/// Stable split of `w`-bit words by msb; exactly half must have msb 0.
/// Outputs are `w − 1` bits wide.
pub fn build_partition(b: &mut CircuitBuilder, x: &[Bus], w: usize) -> (Vec<Bus>, Vec<Bus>) {
    log2_exact(x.len(), "partition");
    assert!(x.len() >= 2, "partition needs at least two words");
    let mut ops = Ops::new(b);
    let xs = elems(&mut ops, x, w, "partition");
    let mut net = Net::new(&mut ops, false, x.len());
    let (l, r) = net.partition(xs);
    let l = out_buses(&mut ops, &l);
    let r = out_buses(&mut ops, &r);
    (l, r)
}

/// Routes each payload to the slot named by its `log n`-bit tag (msbs).
pub fn build_permute(b: &mut CircuitBuilder, x: &[Bus], w: usize) -> Vec<Bus> {
    let log = log2_exact(x.len(), "permute");
    let mut ops = Ops::new(b);
    let xs = elems(&mut ops, x, log + w, "permute");
    let mut net = Net::new(&mut ops, false, x.len());
    let y = net.permute(xs);
    out_buses(&mut ops, &y)
}

/// Keeps the payloads of the `n/2` words whose leading tag bit is 1.
pub fn build_filter(b: &mut CircuitBuilder, x: &[Bus], w: usize) -> Vec<Bus> {
    log2_exact(x.len(), "filter");
    assert!(x.len() >= 2, "filter needs at least two words");
    let mut ops = Ops::new(b);
    let xs = elems(&mut ops, x, 1 + w, "filter");
    let mut net = Net::new(&mut ops, false, x.len());
    let (_, (keep, tags)) = net.partition_tagged(xs);
    keep.iter()
        .zip(tags)
        .map(|(e, t)| {
            let bits = strict(&mut ops, t, &e.bits);
            ops.wires(&bits)
        })
        .collect()
}

/// `AND(fault, self)`: 0 once `fault` is known to be 0, never resolved
/// when it is 1.
fn trap(ops: &mut Ops<'_>, fault: Bit) -> Bit {
    match fault {
        Bit::C(false) => Bit::C(false),
        _ => {
            let f = ops.wire(fault);
            let w = ops.b.reserve();
            ops.b.define(w, GateKind::And, &[f, w]).expect("trap");
            Bit::W(w)
        }
    }
}

/// `bits` when `tag` is 1, unresolvable when it is 0. A target matched with
/// an untagged source only happens when a filter's tags are unbalanced.
fn strict(ops: &mut Ops<'_>, tag: Bit, bits: &[Bit]) -> Vec<Bit> {
    if tag == Bit::C(true) {
        return bits.to_vec();
    }
    let nt = ops.not(tag);
    let stuck = trap(ops, nt);
    bits.iter()
        .map(|&x| {
            let v = ops.and(tag, x);
            ops.xor(v, stuck)
        })
        .collect()
}

/// `src_out[k] = tgt_in[src_addr[k]]` for a permutation of addresses.
pub fn build_bipermute(b: &mut CircuitBuilder, src_addr: &[Bus], tgt_in: &[Bus], w: usize) -> Vec<Bus> {
    let n = src_addr.len();
    let log = log2_exact(n, "bipermute");
    assert_eq!(tgt_in.len(), n, "bipermute: target count must equal source count");
    let mut ops = Ops::new(b);
    let xs = elems(&mut ops, src_addr, log, "bipermute");
    let mut net = Net::new(&mut ops, true, n);
    let routed = net.permute(xs);
    let mut back: Vec<Option<Vec<Bit>>> = vec![None; net.next_edge as usize];
    for (slot, e) in routed.iter().enumerate() {
        assert_eq!(tgt_in[slot].len(), w, "bipermute: target {slot} has wrong width");
        back[e.edge as usize] = Some(net.ops.bits(&tgt_in[slot]));
    }
    let resp = net.respond(back, n);
    resp.iter().map(|r| ops.wires(r)).collect()
}

/// Connects the `n/2` sources tagged 1 with the `n/2` targets, in order,
/// in both directions. Sources tagged 0 receive all-zero responses.
pub fn build_bifilter(
    b: &mut CircuitBuilder,
    src_in: &[Bus],
    tgt_in: &[Bus],
    w: usize,
    omega: usize,
) -> (Vec<Bus>, Vec<Bus>) {
    let n = src_in.len();
    log2_exact(n, "bifilter");
    assert!(n >= 2, "bifilter needs at least two sources");
    assert_eq!(tgt_in.len(), n / 2, "bifilter: needs n/2 targets");
    let mut ops = Ops::new(b);
    let xs = elems(&mut ops, src_in, 1 + w, "bifilter");
    let mut net = Net::new(&mut ops, true, n);
    let ((drop, drop_tags), (keep, keep_tags)) = net.partition_tagged(xs);
    let mut back: Vec<Option<Vec<Bit>>> = vec![None; net.next_edge as usize];
    for (e, &t) in drop.iter().zip(&drop_tags) {
        // A tagged source left over by an overfull filter gets no answer.
        let stuck = trap(net.ops, t);
        back[e.edge as usize] = Some(vec![stuck; omega]);
    }
    for (k, e) in keep.iter().enumerate() {
        assert_eq!(tgt_in[k].len(), omega, "bifilter: target {k} has wrong width");
        back[e.edge as usize] = Some(net.ops.bits(&tgt_in[k]));
    }
    let tgt_out = keep
        .iter()
        .zip(keep_tags)
        .map(|(e, t)| {
            let bits = strict(net.ops, t, &e.bits);
            net.ops.wires(&bits)
        })
        .collect();
    let resp = net.respond(back, n);
    let src_out = resp.iter().map(|r| ops.wires(r)).collect();
    (src_out, tgt_out)
}

/// Tag counts that violate a filter's half-and-half precondition.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BalanceError {
    #[error("{ones} of {n} tags set (expected {})", n / 2)]
    Unbalanced { ones: usize, n: usize },
    #[error("{0} tag wires unresolved")]
    Unresolved(usize),
}

/// Checks an evaluation's tag wires for the filter precondition. Acyclic
/// filters route unbalanced inputs without getting stuck, so this audit is
/// how a standalone network reports the violation.
pub fn tag_balance(e: &Evaluation, tags: &[WireId]) -> Result<(), BalanceError> {
    let mut ones = 0;
    let mut stuck = 0;
    for &t in tags {
        match e.bit(t) {
            Some(true) => ones += 1,
            Some(false) => {}
            None => stuck += 1,
        }
    }
    if stuck > 0 {
        return Err(BalanceError::Unresolved(stuck));
    }
    if ones * 2 != tags.len() {
        return Err(BalanceError::Unbalanced { ones, n: tags.len() });
    }
    Ok(())
}

/// Masks request tags beyond the first `cap` ones: tag `j` survives iff it
/// is set and fewer than `cap` earlier tags are set. Prefix counts use a
/// recursive halving scheme, so each survivor depends only on earlier tags.
pub fn cap_tags(b: &mut CircuitBuilder, tags: &[WireId], cap: usize) -> Vec<WireId> {
    cap_surplus(b, tags, &[], cap)
}

/// Like [`cap_tags`], except that tags whose `firm` wire is 1 always
/// survive; only the other tags are dropped once `cap` earlier tags are set.
/// An empty `firm` slice means no tag is firm.
pub fn cap_surplus(b: &mut CircuitBuilder, tags: &[WireId], firm: &[WireId], cap: usize) -> Vec<WireId> {
    let n = tags.len();
    assert!(firm.is_empty() || firm.len() == n, "cap: one firm wire per tag");
    if n <= cap {
        return tags.to_vec();
    }
    let mut ops = Ops::new(b);
    let t = ops.bits(tags);
    let f = if firm.is_empty() { vec![Bit::C(false); n] } else { ops.bits(firm) };
    let (prefix, _) = exclusive_counts(&mut ops, &t);
    let width = usize::BITS as usize - n.leading_zeros() as usize;
    let capb = const_bits(cap as u64, width);
    t.iter()
        .zip(f)
        .zip(prefix)
        .map(|((&tag, firm), p)| {
            let p = pad(&p, width);
            let below = less_than(&mut ops, &p, &capb);
            let allowed = ops.or(firm, below);
            let keep = ops.and(tag, allowed);
            ops.wire(keep)
        })
        .collect()
}

fn const_bits(v: u64, width: usize) -> Vec<Bit> {
    (0..width).map(|i| Bit::C((v >> (width - 1 - i)) & 1 == 1)).collect()
}

fn pad(x: &[Bit], width: usize) -> Vec<Bit> {
    let mut out = vec![Bit::C(false); width - x.len()];
    out.extend_from_slice(x);
    out
}

fn less_than(ops: &mut Ops<'_>, x: &[Bit], y: &[Bit]) -> Bit {
    // x < y  ⇔  ¬(y ≤ x); scan from the lsb, most significant difference last.
    let mut le = Bit::C(true);
    for i in (0..x.len()).rev() {
        let d = ops.xor(x[i], y[i]);
        let nd = ops.not(d);
        le = ops.mux(d, nd, le, x[i]);
    }
    ops.not(le)
}

/// Exclusive prefix sums of single bits, and the total.
fn exclusive_counts(ops: &mut Ops<'_>, t: &[Bit]) -> (Vec<Vec<Bit>>, Vec<Bit>) {
    let n = t.len();
    if n == 1 {
        return (vec![Vec::new()], vec![t[0]]);
    }
    let h = n / 2;
    let (mut pl, tl) = exclusive_counts(ops, &t[..h]);
    let (pr, tr) = exclusive_counts(ops, &t[h..]);
    let width = tl.len().max(tr.len());
    let tlw = pad(&tl, width);
    for p in pr {
        let pw = pad(&p, width);
        pl.push(ops.add(&pw, &tlw));
    }
    let trw = pad(&tr, width);
    let total = ops.add(&tlw, &trw);
    (pl, total)
}
