//! Cyclic Boolean circuits over the AND/XOR/CONST1/INPUT basis.
//!
//! A [`Circuit`] is an index-addressed gate list whose wiring graph may
//! contain cycles. [`evaluate`] runs constructive ternary propagation and
//! records the delay of every wire it resolves; [`enumerate_assignments`] is
//! the exhaustive legality oracle for small instances.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Identifier of a wire; equal to the index of the gate that drives it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireId(pub u32);

impl WireId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for WireId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A gate together with its fan-in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input(u32),
    Const1,
    And(WireId, WireId),
    Xor(WireId, WireId),
}

/// Gate kind without fan-in, used by [`CircuitBuilder::build_gate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    Input,
    Const1,
    And,
    Xor,
}

impl GateKind {
    fn arity(self) -> usize {
        match self {
            GateKind::Input | GateKind::Const1 => 0,
            GateKind::And | GateKind::Xor => 2,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("{kind:?} takes {expected} fan-ins, got {got}")]
    Arity {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("wire {0} is not allocated")]
    UnknownWire(WireId),
    #[error("wire {0} is already defined")]
    AlreadyDefined(WireId),
    #[error("{count} reserved wires were never defined (first: {first})")]
    Undefined { count: usize, first: WireId },
    #[error("input has {got} bits, circuit expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("{count} non-input wires exceed the enumeration limit of {limit}")]
    TooLarge { count: usize, limit: usize },
    #[error("{count} wires are unresolved")]
    Unresolved { count: usize },
    #[error("circuit exceeds 2^30 wires")]
    Capacity,
}

const KIND_SHIFT: u32 = 30;
const INDEX_MASK: u32 = (1 << KIND_SHIFT) - 1;
const K_INPUT: u32 = 0;
const K_CONST1: u32 = 1;
const K_AND: u32 = 2;
const K_XOR: u32 = 3;
const RESERVED: u32 = u32::MAX;
const ALIAS: u32 = u32::MAX - 1;

fn pack(kind: u32, a: u32, b: u32) -> (u32, u32) {
    (a, (kind << KIND_SHIFT) | b)
}

fn unpack(a: u32, b: u32) -> Gate {
    match b >> KIND_SHIFT {
        K_INPUT => Gate::Input(a),
        K_CONST1 => Gate::Const1,
        K_AND => Gate::And(WireId(a), WireId(b & INDEX_MASK)),
        _ => Gate::Xor(WireId(a), WireId(b & INDEX_MASK)),
    }
}

/// A labelled contiguous range of wires, used to group diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub start: u32,
    pub label: String,
}

/// Incrementally builds a [`Circuit`]. Cycles are expressed by reserving a
/// wire first and defining its gate later.
#[derive(Default)]
pub struct CircuitBuilder {
    a: Vec<u32>,
    b: Vec<u32>,
    inputs: u32,
    outputs: Vec<WireId>,
    regions: Vec<Region>,
    one: Option<WireId>,
    zero: Option<WireId>,
    pending: usize,
    aliases: usize,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn input_arity(&self) -> usize {
        self.inputs as usize
    }

    fn push(&mut self, kind: u32, a: u32, b: u32) -> WireId {
        let id = self.a.len() as u32;
        assert!(id < INDEX_MASK - 1, "circuit exceeds 2^30 wires");
        let (pa, pb) = pack(kind, a, b);
        self.a.push(pa);
        self.b.push(pb);
        WireId(id)
    }

    /// Adds an INPUT gate at the next input position.
    pub fn input(&mut self) -> WireId {
        let pos = self.inputs;
        self.inputs += 1;
        self.push(K_INPUT, pos, 0)
    }

    /// Adds a fresh CONST1 gate.
    pub fn const1(&mut self) -> WireId {
        self.push(K_CONST1, 0, 0)
    }

    /// Shared constant-one wire.
    pub fn one(&mut self) -> WireId {
        match self.one {
            Some(w) => w,
            None => {
                let w = self.const1();
                self.one = Some(w);
                w
            }
        }
    }

    /// Shared constant-zero wire, built as `1 ⊕ 1`.
    pub fn zero(&mut self) -> WireId {
        match self.zero {
            Some(w) => w,
            None => {
                let one = self.one();
                let w = self.xor(one, one);
                self.zero = Some(w);
                w
            }
        }
    }

    pub fn and(&mut self, a: WireId, b: WireId) -> WireId {
        debug_assert!(a.index() < self.len() && b.index() < self.len());
        self.push(K_AND, a.0, b.0)
    }

    pub fn xor(&mut self, a: WireId, b: WireId) -> WireId {
        debug_assert!(a.index() < self.len() && b.index() < self.len());
        self.push(K_XOR, a.0, b.0)
    }

    pub fn not(&mut self, a: WireId) -> WireId {
        let one = self.one();
        self.xor(a, one)
    }

    /// `a ∨ b` as `(a·b) ⊕ a ⊕ b`.
    pub fn or(&mut self, a: WireId, b: WireId) -> WireId {
        let ab = self.and(a, b);
        let t = self.xor(ab, a);
        self.xor(t, b)
    }

    /// Checked gate construction with explicit arity.
    pub fn build_gate(&mut self, kind: GateKind, fanins: &[WireId]) -> Result<WireId, CircuitError> {
        self.check_fanins(kind, fanins)?;
        Ok(match kind {
            GateKind::Input => self.input(),
            GateKind::Const1 => self.const1(),
            GateKind::And => self.and(fanins[0], fanins[1]),
            GateKind::Xor => self.xor(fanins[0], fanins[1]),
        })
    }

    fn check_fanins(&self, kind: GateKind, fanins: &[WireId]) -> Result<(), CircuitError> {
        if fanins.len() != kind.arity() {
            return Err(CircuitError::Arity {
                kind,
                expected: kind.arity(),
                got: fanins.len(),
            });
        }
        match fanins.iter().find(|w| w.index() >= self.len()) {
            Some(&w) => Err(CircuitError::UnknownWire(w)),
            None => Ok(()),
        }
    }

    /// Allocates a wire whose gate is supplied later by [`define`](Self::define).
    pub fn reserve(&mut self) -> WireId {
        self.pending += 1;
        let id = self.a.len() as u32;
        assert!(id < INDEX_MASK - 1, "circuit exceeds 2^30 wires");
        self.a.push(RESERVED);
        self.b.push(RESERVED);
        WireId(id)
    }

    pub fn reserve_bus(&mut self, width: usize) -> Vec<WireId> {
        (0..width).map(|_| self.reserve()).collect()
    }

    /// Defines a reserved wire. INPUT is not allowed here since input
    /// positions follow allocation order.
    pub fn define(&mut self, wire: WireId, kind: GateKind, fanins: &[WireId]) -> Result<(), CircuitError> {
        if wire.index() >= self.len() {
            return Err(CircuitError::UnknownWire(wire));
        }
        if self.a[wire.index()] != RESERVED || self.b[wire.index()] != RESERVED {
            return Err(CircuitError::AlreadyDefined(wire));
        }
        self.check_fanins(kind, fanins)?;
        let (pa, pb) = match kind {
            GateKind::Input => return Err(CircuitError::AlreadyDefined(wire)),
            GateKind::Const1 => pack(K_CONST1, 0, 0),
            GateKind::And => pack(K_AND, fanins[0].0, fanins[1].0),
            GateKind::Xor => pack(K_XOR, fanins[0].0, fanins[1].0),
        };
        self.a[wire.index()] = pa;
        self.b[wire.index()] = pb;
        self.pending -= 1;
        Ok(())
    }

    /// Makes a reserved wire an alias of `source`. At
    /// [`finalize`](Self::finalize) every reference to the alias is rewired
    /// to the source, so the connection adds no delay on any path.
    pub fn connect(&mut self, reserved: WireId, source: WireId) {
        let i = reserved.index();
        assert!(
            i < self.len() && self.a[i] == RESERVED && self.b[i] == RESERVED,
            "connect target must be an undefined reserved wire"
        );
        self.a[i] = source.0;
        self.b[i] = ALIAS;
        self.pending -= 1;
        self.aliases += 1;
    }

    pub fn connect_bus(&mut self, reserved: &[WireId], source: &[WireId]) {
        assert_eq!(reserved.len(), source.len(), "bus width mismatch in connect");
        for (&r, &s) in reserved.iter().zip(source) {
            self.connect(r, s);
        }
    }

    pub fn output(&mut self, wire: WireId) {
        self.outputs.push(wire);
    }

    /// Starts a labelled region at the next allocated wire.
    pub fn region(&mut self, label: &str) {
        let start = self.len() as u32;
        if let Some(last) = self.regions.last_mut() {
            if last.start == start {
                last.label = label.to_string();
                return;
            }
        }
        self.regions.push(Region {
            start,
            label: label.to_string(),
        });
    }

    /// Rewires every reference to an alias so it reads the source directly.
    /// The placeholder keeps its number and becomes `AND(src, src)` so that
    /// wire ids held by callers stay meaningful.
    fn resolve_aliases(&mut self) -> Result<(), CircuitError> {
        let n = self.a.len();
        let mut target: Vec<u32> = (0..n as u32).collect();
        for i in 0..n {
            if self.b[i] != ALIAS {
                continue;
            }
            let mut j = i;
            let mut steps = 0;
            while self.b[j] == ALIAS {
                j = self.a[j] as usize;
                steps += 1;
                if steps > n || j >= n {
                    return Err(CircuitError::UnknownWire(WireId(i as u32)));
                }
            }
            target[i] = j as u32;
        }
        for i in 0..n {
            let (x, y) = (self.a[i], self.b[i]);
            if y == ALIAS {
                let t = target[i];
                let (pa, pb) = pack(K_AND, t, t);
                self.a[i] = pa;
                self.b[i] = pb;
            } else if y >> KIND_SHIFT >= K_AND {
                let (pa, pb) = pack(y >> KIND_SHIFT, target[x as usize], target[(y & INDEX_MASK) as usize]);
                self.a[i] = pa;
                self.b[i] = pb;
            }
        }
        self.aliases = 0;
        Ok(())
    }

    pub fn finalize(mut self) -> Result<Circuit, CircuitError> {
        if self.pending > 0 {
            let first = self
                .a
                .iter()
                .zip(&self.b)
                .position(|(&a, &b)| a == RESERVED && b == RESERVED)
                .unwrap_or(0);
            return Err(CircuitError::Undefined {
                count: self.pending,
                first: WireId(first as u32),
            });
        }
        if self.aliases > 0 {
            self.resolve_aliases()?;
        }
        let n = self.a.len() as u32;
        for (&a, &b) in self.a.iter().zip(&self.b) {
            let kind = b >> KIND_SHIFT;
            if (kind == K_AND || kind == K_XOR) && (a >= n || (b & INDEX_MASK) >= n) {
                let bad = if a >= n { a } else { b & INDEX_MASK };
                return Err(CircuitError::UnknownWire(WireId(bad)));
            }
        }
        if let Some(&w) = self.outputs.iter().find(|w| w.0 >= n) {
            return Err(CircuitError::UnknownWire(w));
        }
        Ok(Circuit::from_parts(
            self.a,
            self.b,
            self.inputs,
            self.outputs,
            self.regions,
        ))
    }
}

/// A finalized cyclic circuit with a precomputed fan-out index.
#[derive(Clone, Debug)]
pub struct Circuit {
    a: Vec<u32>,
    b: Vec<u32>,
    input_arity: u32,
    outputs: Vec<WireId>,
    regions: Vec<Region>,
    fanout_start: Vec<u32>,
    fanout: Vec<u32>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b == other.b
            && self.input_arity == other.input_arity
            && self.outputs == other.outputs
    }
}

impl Circuit {
    fn from_parts(a: Vec<u32>, b: Vec<u32>, input_arity: u32, outputs: Vec<WireId>, regions: Vec<Region>) -> Self {
        let n = a.len();
        let mut counts = vec![0u32; n + 1];
        for (&x, &y) in a.iter().zip(&b) {
            let kind = y >> KIND_SHIFT;
            if kind == K_AND || kind == K_XOR {
                counts[x as usize + 1] += 1;
                counts[(y & INDEX_MASK) as usize + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut fanout = vec![0u32; counts[n] as usize];
        for (g, (&x, &y)) in a.iter().zip(&b).enumerate() {
            let kind = y >> KIND_SHIFT;
            if kind == K_AND || kind == K_XOR {
                for src in [x, y & INDEX_MASK] {
                    fanout[fill[src as usize] as usize] = g as u32;
                    fill[src as usize] += 1;
                }
            }
        }
        Circuit {
            a,
            b,
            input_arity,
            outputs,
            regions,
            fanout_start: counts,
            fanout,
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn gate(&self, w: WireId) -> Gate {
        unpack(self.a[w.index()], self.b[w.index()])
    }

    pub fn gates(&self) -> impl Iterator<Item = Gate> + '_ {
        self.a.iter().zip(&self.b).map(|(&a, &b)| unpack(a, b))
    }

    pub fn input_arity(&self) -> usize {
        self.input_arity as usize
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Label of the region containing `w`, or `"circuit"` outside any region.
    pub fn region_of(&self, w: WireId) -> &str {
        let idx = self.regions.partition_point(|r| r.start <= w.0);
        if idx == 0 {
            "circuit"
        } else {
            &self.regions[idx - 1].label
        }
    }

    /// Number of AND and XOR gates.
    pub fn logic_gate_count(&self) -> usize {
        self.b
            .iter()
            .filter(|&&b| b >> KIND_SHIFT >= K_AND)
            .count()
    }

    fn fanout_of(&self, w: u32) -> &[u32] {
        let s = self.fanout_start[w as usize] as usize;
        let e = self.fanout_start[w as usize + 1] as usize;
        &self.fanout[s..e]
    }

    /// Positions of INPUT gates are a permutation of `0..input_arity`.
    fn input_wires(&self) -> Vec<u32> {
        let mut by_pos = vec![u32::MAX; self.input_arity as usize];
        for (i, (&a, &b)) in self.a.iter().zip(&self.b).enumerate() {
            if b >> KIND_SHIFT == K_INPUT {
                by_pos[a as usize] = i as u32;
            }
        }
        by_pos
    }
}

/// A wire value under constructive evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ternary {
    Zero,
    One,
    Unknown,
}

impl Ternary {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Ternary::One
        } else {
            Ternary::Zero
        }
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            Ternary::Zero => Some(false),
            Ternary::One => Some(true),
            Ternary::Unknown => None,
        }
    }
}

const V0: u8 = 0;
const V1: u8 = 1;
const VU: u8 = 2;
const NO_DELAY: u32 = u32::MAX;

/// Per-wire values and delays produced by [`evaluate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    values: Vec<u8>,
    delays: Vec<u32>,
}

impl Evaluation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, w: WireId) -> Ternary {
        match self.values[w.index()] {
            V0 => Ternary::Zero,
            V1 => Ternary::One,
            _ => Ternary::Unknown,
        }
    }

    pub fn bit(&self, w: WireId) -> Option<bool> {
        self.value(w).to_bool()
    }

    pub fn delay(&self, w: WireId) -> Option<u32> {
        let d = self.delays[w.index()];
        (d != NO_DELAY).then_some(d)
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|&v| v != VU)
    }

    pub fn unresolved(&self) -> Vec<WireId> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == VU)
            .map(|(i, _)| WireId(i as u32))
            .collect()
    }

    pub fn unresolved_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == VU).count()
    }

    /// Reads a bus as an unsigned integer, msb first.
    pub fn word(&self, bus: &[WireId]) -> Option<u64> {
        let mut v = 0u64;
        for &w in bus {
            v = (v << 1) | self.bit(w)? as u64;
        }
        Some(v)
    }

    /// Largest delay over the given wires, if all resolved.
    pub fn max_delay(&self, wires: &[WireId]) -> Option<u32> {
        wires.iter().map(|&w| self.delay(w)).try_fold(0, |m, d| d.map(|d| m.max(d)))
    }
}

/// Constructive ternary propagation from the inputs and constants.
///
/// Wires are resolved level by level: everything resolved at time `t` is
/// committed before any gate is examined for time `t + 1`, and each level is
/// processed in wire order.
pub fn evaluate(circuit: &Circuit, input: &[bool]) -> Result<Evaluation, CircuitError> {
    if input.len() != circuit.input_arity() {
        return Err(CircuitError::InputLength {
            expected: circuit.input_arity(),
            got: input.len(),
        });
    }
    let n = circuit.len();
    let mut values = vec![VU; n];
    let mut delays = vec![NO_DELAY; n];
    let mut frontier = Vec::new();
    for (i, (&a, &b)) in circuit.a.iter().zip(&circuit.b).enumerate() {
        match b >> KIND_SHIFT {
            K_INPUT => {
                values[i] = input[a as usize] as u8;
                delays[i] = 0;
                frontier.push(i as u32);
            }
            K_CONST1 => {
                values[i] = V1;
                delays[i] = 0;
                frontier.push(i as u32);
            }
            _ => {}
        }
    }
    let mut next = Vec::new();
    let mut t: u32 = 0;
    while !frontier.is_empty() {
        for &w in &frontier {
            for &g in circuit.fanout_of(w) {
                let gi = g as usize;
                if values[gi] != VU {
                    continue;
                }
                let x = circuit.a[gi] as usize;
                let pb = circuit.b[gi];
                let y = (pb & INDEX_MASK) as usize;
                let vx = if delays[x] <= t { values[x] } else { VU };
                let vy = if delays[y] <= t { values[y] } else { VU };
                let v = if pb >> KIND_SHIFT == K_AND {
                    if vx == V0 || vy == V0 {
                        V0
                    } else if vx == V1 && vy == V1 {
                        V1
                    } else {
                        continue;
                    }
                } else if vx != VU && vy != VU {
                    vx ^ vy
                } else {
                    continue;
                };
                values[gi] = v;
                delays[gi] = t + 1;
                next.push(g);
            }
        }
        next.sort_unstable();
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
        t += 1;
    }
    Ok(Evaluation { values, delays })
}

/// Output wires that did not resolve.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unresolved output wires: {wires:?}")]
pub struct Unresolved {
    pub wires: Vec<WireId>,
}

/// The circuit's output bits, or the stuck output wires.
pub fn read_outputs(evaluation: &Evaluation, circuit: &Circuit) -> Result<Vec<bool>, Unresolved> {
    let stuck: Vec<WireId> = circuit
        .outputs
        .iter()
        .copied()
        .filter(|&w| evaluation.bit(w).is_none())
        .collect();
    if !stuck.is_empty() {
        return Err(Unresolved { wires: stuck });
    }
    Ok(circuit.outputs.iter().map(|&w| evaluation.bit(w).unwrap()).collect())
}

/// Maximum delay over all wires of a fully resolved evaluation.
pub fn measured_delay(evaluation: &Evaluation) -> Result<u32, CircuitError> {
    let count = evaluation.unresolved_count();
    if count > 0 {
        return Err(CircuitError::Unresolved { count });
    }
    Ok(evaluation.delays.iter().copied().max().unwrap_or(0))
}

pub const ENUMERATION_LIMIT: usize = 24;

/// Result of [`enumerate_assignments`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignments {
    pub count: u64,
    /// Full wire maps, present when collection was requested.
    pub assignments: Vec<Vec<bool>>,
}

/// Counts maps from wires to bits that satisfy every gate for this input.
pub fn enumerate_assignments(circuit: &Circuit, input: &[bool], collect: bool) -> Result<Assignments, CircuitError> {
    if input.len() != circuit.input_arity() {
        return Err(CircuitError::InputLength {
            expected: circuit.input_arity(),
            got: input.len(),
        });
    }
    let n = circuit.len();
    let vars: Vec<usize> = (0..n)
        .filter(|&i| circuit.b[i] >> KIND_SHIFT != K_INPUT)
        .collect();
    if vars.len() > ENUMERATION_LIMIT {
        return Err(CircuitError::TooLarge {
            count: vars.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    // Position of each wire in the variable order; inputs are fixed up front.
    let mut order = vec![usize::MAX; n];
    for (k, &v) in vars.iter().enumerate() {
        order[v] = k;
    }
    let mut value = vec![false; n];
    for (i, (&a, &b)) in circuit.a.iter().zip(&circuit.b).enumerate() {
        if b >> KIND_SHIFT == K_INPUT {
            value[i] = input[a as usize];
        }
    }
    // Each gate is checked once its last wire in variable order is assigned.
    let mut checks: Vec<Vec<usize>> = vec![Vec::new(); vars.len()];
    for &g in &vars {
        let last = match circuit.gate(WireId(g as u32)) {
            Gate::Const1 => order[g],
            Gate::And(x, y) | Gate::Xor(x, y) => [g, x.index(), y.index()]
                .iter()
                .filter(|&&w| order[w] != usize::MAX)
                .map(|&w| order[w])
                .max()
                .unwrap_or(order[g]),
            Gate::Input(_) => unreachable!(),
        };
        checks[last].push(g);
    }
    let mut out = Assignments {
        count: 0,
        assignments: Vec::new(),
    };
    let holds = |value: &[bool], g: usize| -> bool {
        match circuit.gate(WireId(g as u32)) {
            Gate::Const1 => value[g],
            Gate::And(x, y) => value[g] == (value[x.index()] && value[y.index()]),
            Gate::Xor(x, y) => value[g] == (value[x.index()] ^ value[y.index()]),
            Gate::Input(_) => true,
        }
    };
    fn search(
        k: usize,
        vars: &[usize],
        checks: &[Vec<usize>],
        value: &mut Vec<bool>,
        holds: &dyn Fn(&[bool], usize) -> bool,
        collect: bool,
        out: &mut Assignments,
    ) {
        if k == vars.len() {
            out.count += 1;
            if collect {
                out.assignments.push(value.clone());
            }
            return;
        }
        for bit in [false, true] {
            value[vars[k]] = bit;
            if checks[k].iter().all(|&g| holds(value, g)) {
                search(k + 1, vars, checks, value, holds, collect, out);
            }
        }
    }
    search(0, &vars, &checks, &mut value, &holds, collect, &mut out);
    Ok(out)
}

/// Parses a bit string such as `"0110"`; index 0 is the leftmost character.
pub fn parse_bits(s: &str) -> Result<Vec<bool>, String> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("invalid bit character {other:?}")),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Appends the low `width` bits of `v`, msb first.
pub fn push_word(bits: &mut Vec<bool>, v: u64, width: usize) {
    bits.extend((0..width).rev().map(|i| i < 64 && (v >> i) & 1 == 1));
}

/// Reads a msb-first word from a bit slice.
pub fn read_word(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |v, &b| (v << 1) | b as u64)
}

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes the text netlist. Region labels are emitted as `# region` comments.
pub fn write_netlist<W: Write>(circuit: &Circuit, mut out: W) -> io::Result<()> {
    let mut next_region = 0;
    for i in 0..circuit.len() {
        while next_region < circuit.regions.len() && circuit.regions[next_region].start as usize == i {
            writeln!(out, "# region {}", circuit.regions[next_region].label)?;
            next_region += 1;
        }
        match circuit.gate(WireId(i as u32)) {
            Gate::Input(p) => writeln!(out, "INPUT {i} {p}")?,
            Gate::Const1 => writeln!(out, "CONST1 {i}")?,
            Gate::And(x, y) => writeln!(out, "AND {i} {x} {y}")?,
            Gate::Xor(x, y) => writeln!(out, "XOR {i} {x} {y}")?,
        }
    }
    for w in &circuit.outputs {
        writeln!(out, "OUTPUT {w}")?;
    }
    Ok(())
}

pub fn netlist_string(circuit: &Circuit) -> String {
    let mut buf = Vec::new();
    write_netlist(circuit, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("netlist is ASCII")
}

/// Parses a text netlist. Gate records may appear in any order but must
/// define every wire `0..n` exactly once.
pub fn parse_netlist<R: BufRead>(input: R) -> Result<Circuit, NetlistError> {
    let mut gates: Vec<Option<(u32, u32)>> = Vec::new();
    let mut outputs = Vec::new();
    let mut regions = Vec::new();
    let mut input_positions: HashMap<u32, u32> = HashMap::new();
    let mut pending_region: Option<String> = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(label) = rest.trim().strip_prefix("region ") {
                pending_region = Some(label.to_string());
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let syntax = |msg: &str| NetlistError::Syntax {
            line: lineno,
            msg: msg.to_string(),
        };
        let num = |s: &str| -> Result<u32, NetlistError> {
            s.parse::<u32>()
                .ok()
                .filter(|&v| v < INDEX_MASK)
                .ok_or_else(|| syntax(&format!("bad number {s:?}")))
        };
        let expect_len = |k: usize| -> Result<(), NetlistError> {
            if fields.len() == k {
                Ok(())
            } else {
                Err(syntax(&format!("{} expects {} fields", fields[0], k - 1)))
            }
        };
        if fields[0] == "OUTPUT" {
            expect_len(2)?;
            outputs.push(WireId(num(fields[1])?));
            continue;
        }
        let (wire, packed) = match fields[0] {
            "INPUT" => {
                expect_len(3)?;
                let w = num(fields[1])?;
                let p = num(fields[2])?;
                if input_positions.insert(p, w).is_some() {
                    return Err(syntax(&format!("input position {p} used twice")));
                }
                (w, pack(K_INPUT, p, 0))
            }
            "CONST1" => {
                expect_len(2)?;
                (num(fields[1])?, pack(K_CONST1, 0, 0))
            }
            "AND" | "XOR" => {
                expect_len(4)?;
                let kind = if fields[0] == "AND" { K_AND } else { K_XOR };
                (num(fields[1])?, pack(kind, num(fields[2])?, num(fields[3])?))
            }
            other => return Err(syntax(&format!("unknown record {other:?}"))),
        };
        let idx = wire as usize;
        if gates.len() <= idx {
            gates.resize(idx + 1, None);
        }
        if gates[idx].is_some() {
            return Err(syntax(&format!("wire {wire} defined twice")));
        }
        gates[idx] = Some(packed);
        if let Some(label) = pending_region.take() {
            regions.push(Region { start: wire, label });
        }
    }
    let n = gates.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for (i, g) in gates.into_iter().enumerate() {
        let (x, y) = g.ok_or(CircuitError::UnknownWire(WireId(i as u32)))?;
        a.push(x);
        b.push(y);
    }
    let arity = input_positions.len() as u32;
    if let Some(&p) = input_positions.keys().find(|&&p| p >= arity) {
        return Err(NetlistError::Syntax {
            line: 0,
            msg: format!("input positions are not dense (found {p})"),
        });
    }
    for (&x, &y) in a.iter().zip(&b) {
        let kind = y >> KIND_SHIFT;
        if kind >= K_AND {
            for src in [x, y & INDEX_MASK] {
                if src as usize >= n {
                    return Err(CircuitError::UnknownWire(WireId(src)).into());
                }
            }
        }
    }
    if let Some(&w) = outputs.iter().find(|w| w.index() >= n) {
        return Err(CircuitError::UnknownWire(w).into());
    }
    regions.sort_by_key(|r| r.start);
    Ok(Circuit::from_parts(a, b, arity, outputs, regions))
}

/// Inputs in position order, for callers that need to map wires back.
pub fn input_wires(circuit: &Circuit) -> Vec<WireId> {
    circuit.input_wires().into_iter().map(WireId).collect()
}
