//! Word-level generators: mux, swap, ripple-carry adder, comparator, and
//! gate-free bus rearrangements.
//!
//! A bus is a list of wires with index 0 as the most significant bit.

use thiserror::Error;

use crate::circuit::{CircuitBuilder, WireId};

pub type Bus = Vec<WireId>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WidthError {
    #[error("bus widths differ: {0} vs {1}")]
    Mismatch(usize, usize),
    #[error("bus of length {0} cannot be halved")]
    Odd(usize),
    #[error("bus of length {len} is not a whole number of {word}-bit words")]
    NotDivisible { len: usize, word: usize },
}

fn same_width(x: &[WireId], y: &[WireId]) -> Result<(), WidthError> {
    if x.len() == y.len() {
        Ok(())
    } else {
        Err(WidthError::Mismatch(x.len(), y.len()))
    }
}

/// `(1⊕s)·x ⊕ s·y`, given `ns = 1⊕s`.
pub(crate) fn mux_with(b: &mut CircuitBuilder, s: WireId, ns: WireId, x: WireId, y: WireId) -> WireId {
    let l = b.and(ns, x);
    let r = b.and(s, y);
    b.xor(l, r)
}

/// Selects `x` when `s = 0` and `y` when `s = 1`.
pub fn mux_bit(b: &mut CircuitBuilder, s: WireId, x: WireId, y: WireId) -> WireId {
    let ns = b.not(s);
    mux_with(b, s, ns, x, y)
}

pub fn mux_bus(b: &mut CircuitBuilder, s: WireId, x: &[WireId], y: &[WireId]) -> Result<Bus, WidthError> {
    same_width(x, y)?;
    Ok(mux_unchecked(b, s, x, y))
}

pub(crate) fn mux_unchecked(b: &mut CircuitBuilder, s: WireId, x: &[WireId], y: &[WireId]) -> Bus {
    let ns = b.not(s);
    x.iter().zip(y).map(|(&xi, &yi)| mux_with(b, s, ns, xi, yi)).collect()
}

/// `(x, y)` when `s = 0`, `(y, x)` when `s = 1`.
///
/// Each side is `¬s·x ∨ s·y`. The two AND terms are never both one, so the
/// disjunction is formed with a single XOR; a masked-off term still resolves
/// to zero as soon as `s` does, so each output forwards its selected source
/// without waiting for the other.
pub fn swap_bus(b: &mut CircuitBuilder, s: WireId, x: &[WireId], y: &[WireId]) -> Result<(Bus, Bus), WidthError> {
    same_width(x, y)?;
    Ok(swap_unchecked(b, s, x, y))
}

pub(crate) fn swap_unchecked(b: &mut CircuitBuilder, s: WireId, x: &[WireId], y: &[WireId]) -> (Bus, Bus) {
    let ns = b.not(s);
    swap_with(b, s, ns, x, y)
}

pub(crate) fn swap_with(b: &mut CircuitBuilder, s: WireId, ns: WireId, x: &[WireId], y: &[WireId]) -> (Bus, Bus) {
    let mut first = Vec::with_capacity(x.len());
    let mut second = Vec::with_capacity(x.len());
    for (&xi, &yi) in x.iter().zip(y) {
        first.push(mux_with(b, s, ns, xi, yi));
        second.push(mux_with(b, s, ns, yi, xi));
    }
    (first, second)
}

/// Ripple-carry sum with the carry prefixed: `|x| + 1` bits.
///
/// Built from the lsb upward, so output bit `i` from the right resolves
/// within `O(i)` delay of the inputs.
pub fn ripple_add(b: &mut CircuitBuilder, x: &[WireId], y: &[WireId]) -> Result<Bus, WidthError> {
    same_width(x, y)?;
    Ok(add_unchecked(b, x, y))
}

pub(crate) fn add_unchecked(b: &mut CircuitBuilder, x: &[WireId], y: &[WireId]) -> Bus {
    let n = x.len();
    let mut out = vec![WireId(0); n + 1];
    let mut carry = b.zero();
    for i in (0..n).rev() {
        let xc = b.xor(x[i], carry);
        let yc = b.xor(y[i], carry);
        out[i + 1] = b.xor(xc, y[i]);
        let t = b.and(xc, yc);
        carry = b.xor(t, carry);
    }
    out[0] = carry;
    out
}

/// `1` iff `x ≤ y` as unsigned integers.
pub fn leq_compare(b: &mut CircuitBuilder, x: &[WireId], y: &[WireId]) -> Result<WireId, WidthError> {
    same_width(x, y)?;
    Ok(leq_unchecked(b, x, y))
}

pub(crate) fn leq_unchecked(b: &mut CircuitBuilder, x: &[WireId], y: &[WireId]) -> WireId {
    // Scan from the lsb; the most significant differing bit decides last.
    let mut le = b.one();
    for i in (0..x.len()).rev() {
        let d = b.xor(x[i], y[i]);
        le = mux_bit(b, d, le, y[i]);
    }
    le
}

/// `1` iff `x = y`.
pub fn eq_compare(b: &mut CircuitBuilder, x: &[WireId], y: &[WireId]) -> Result<WireId, WidthError> {
    same_width(x, y)?;
    let mut acc = b.one();
    for (&xi, &yi) in x.iter().zip(y) {
        let d = b.xor(xi, yi);
        let same = b.not(d);
        acc = b.and(acc, same);
    }
    Ok(acc)
}

/// Three muxes around `f` and `g`: `g(f(x))` when `s = 0`, `f(g(x))` when
/// `s = 1`. Each subcircuit is built once; the order is picked at runtime.
pub fn choice_cycle(
    b: &mut CircuitBuilder,
    s: WireId,
    x: WireId,
    f: impl FnOnce(&mut CircuitBuilder, WireId) -> WireId,
    g: impl FnOnce(&mut CircuitBuilder, WireId) -> WireId,
) -> WireId {
    let f_out = b.reserve();
    let g_out = b.reserve();
    let f_in = mux_bit(b, s, x, g_out);
    let g_in = mux_bit(b, s, f_out, x);
    let fo = f(b, f_in);
    let go = g(b, g_in);
    b.connect(f_out, fo);
    b.connect(g_out, go);
    mux_bit(b, s, g_out, f_out)
}

/// Constant bus holding `value` in `width` bits.
pub fn const_bus(b: &mut CircuitBuilder, value: u64, width: usize) -> Bus {
    (0..width)
        .map(|i| {
            let shift = width - 1 - i;
            if shift < 64 && (value >> shift) & 1 == 1 {
                b.one()
            } else {
                b.zero()
            }
        })
        .collect()
}

pub fn halves(x: &[WireId]) -> Result<(Bus, Bus), WidthError> {
    if x.len() % 2 != 0 {
        return Err(WidthError::Odd(x.len()));
    }
    let (l, r) = x.split_at(x.len() / 2);
    Ok((l.to_vec(), r.to_vec()))
}

pub fn reverse(x: &[WireId]) -> Bus {
    x.iter().rev().copied().collect()
}

/// Drops the msb of every `word`-bit word.
pub fn drop_msbs(x: &[WireId], word: usize) -> Result<Bus, WidthError> {
    if word == 0 || x.len() % word != 0 {
        return Err(WidthError::NotDivisible { len: x.len(), word });
    }
    Ok(x.chunks(word).flat_map(|c| c[1..].iter().copied()).collect())
}

pub fn concat(parts: &[&[WireId]]) -> Bus {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{evaluate, GateKind};

    fn bits(v: u64, w: usize) -> Vec<bool> {
        (0..w).map(|i| (v >> (w - 1 - i)) & 1 == 1).collect()
    }

    #[test]
    fn adder_base_case_is_single_zero() {
        let mut b = CircuitBuilder::new();
        let out = ripple_add(&mut b, &[], &[]).unwrap();
        assert_eq!(out.len(), 1);
        let c = b.finalize().unwrap();
        let e = evaluate(&c, &[]).unwrap();
        assert_eq!(e.word(&out), Some(0));
    }

    #[test]
    fn adder_three_plus_one() {
        let mut b = CircuitBuilder::new();
        let x: Bus = (0..3).map(|_| b.input()).collect();
        let y: Bus = (0..3).map(|_| b.input()).collect();
        let out = ripple_add(&mut b, &x, &y).unwrap();
        let c = b.finalize().unwrap();
        let mut input = bits(3, 3);
        input.extend(bits(1, 3));
        let e = evaluate(&c, &input).unwrap();
        assert_eq!(e.word(&out), Some(4));
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn rearrangements_add_no_gates() {
        let mut b = CircuitBuilder::new();
        let x: Bus = (0..6).map(|_| b.input()).collect();
        let before = b.len();
        let (l, r) = halves(&x[..4]).unwrap();
        assert_eq!((l, r), (x[..2].to_vec(), x[2..4].to_vec()));
        assert_eq!(reverse(&x[..3]), vec![x[2], x[1], x[0]]);
        assert_eq!(drop_msbs(&x, 3).unwrap(), vec![x[1], x[2], x[4], x[5]]);
        assert_eq!(concat(&[&x[..1], &x[5..]]), vec![x[0], x[5]]);
        assert_eq!(b.len(), before);
        assert_eq!(halves(&x[..3]), Err(WidthError::Odd(3)));
        assert!(drop_msbs(&x, 4).is_err());
    }

    #[test]
    fn swap_forwards_resolved_side() {
        let mut b = CircuitBuilder::new();
        let s = b.input();
        let x = vec![b.input()];
        let stuck = b.reserve();
        let inner = b.input();
        b.define(stuck, GateKind::And, &[inner, stuck]).unwrap();
        let (p, q) = swap_bus(&mut b, s, &x, &[stuck]).unwrap();
        let c = b.finalize().unwrap();
        // inner = 1 keeps the loop unresolved
        let e = evaluate(&c, &[true, true, true]).unwrap();
        assert_eq!(e.bit(p[0]), None);
        assert_eq!(e.bit(q[0]), Some(true));
        let e = evaluate(&c, &[false, true, true]).unwrap();
        assert_eq!(e.bit(p[0]), Some(true));
        assert_eq!(e.bit(q[0]), None);
    }
}
