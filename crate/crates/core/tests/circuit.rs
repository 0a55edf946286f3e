use cyclic_core::circuit::*;
use cyclic_core::gadgets::*;
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Spec {
    Const1,
    And(usize, usize),
    Xor(usize, usize),
}

fn spec_strategy() -> impl Strategy<Value = (usize, Vec<Spec>)> {
    (0usize..4, 1usize..=16).prop_flat_map(|(inputs, gates)| {
        let n = inputs + gates;
        let gate = prop_oneof![
            1 => Just(Spec::Const1),
            4 => (0..n, 0..n).prop_map(|(a, b)| Spec::And(a, b)),
            3 => (0..n, 0..n).prop_map(|(a, b)| Spec::Xor(a, b)),
        ];
        (Just(inputs), prop::collection::vec(gate, gates))
    })
}

fn build(inputs: usize, gates: &[Spec]) -> Circuit {
    let mut b = CircuitBuilder::new();
    for _ in 0..inputs {
        b.input();
    }
    let ws: Vec<WireId> = gates.iter().map(|_| b.reserve()).collect();
    for (g, &w) in gates.iter().zip(&ws) {
        match *g {
            Spec::Const1 => b.define(w, GateKind::Const1, &[]).unwrap(),
            Spec::And(x, y) => b.define(w, GateKind::And, &[WireId(x as u32), WireId(y as u32)]).unwrap(),
            Spec::Xor(x, y) => b.define(w, GateKind::Xor, &[WireId(x as u32), WireId(y as u32)]).unwrap(),
        }
    }
    for &w in ws.iter().rev().take(2) {
        b.output(w);
    }
    b.finalize().unwrap()
}

fn all_inputs(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..1 << n).map(move |v| (0..n).map(|i| (v >> i) & 1 == 1).collect())
}

fn wires(c: &Circuit) -> impl Iterator<Item = WireId> {
    (0..c.len() as u32).map(WireId)
}

/// Checks one wire's delay against the gate constraints; `d` stands in for
/// the wire's own delay so that decremented values can be probed.
fn delay_ok(c: &Circuit, e: &Evaluation, w: WireId, d: u32) -> bool {
    match c.gate(w) {
        Gate::Input(_) | Gate::Const1 => true,
        Gate::Xor(x, y) => d == 1 + e.delay(x).unwrap().max(e.delay(y).unwrap()),
        Gate::And(x, y) => {
            let (dx, dy) = (e.delay(x).unwrap(), e.delay(y).unwrap());
            let mut ok = d >= 1 + dx.min(dy);
            if e.bit(y) != Some(false) {
                ok &= d > dx;
            }
            if e.bit(x) != Some(false) {
                ok &= d > dy;
            }
            ok
        }
    }
}

fn gate_holds(c: &Circuit, e: &Evaluation, w: WireId) -> bool {
    let v = e.bit(w).unwrap();
    match c.gate(w) {
        Gate::Input(_) => true,
        Gate::Const1 => v,
        Gate::And(x, y) => match (e.bit(x), e.bit(y)) {
            (Some(a), Some(b)) => v == (a && b),
            (Some(false), None) | (None, Some(false)) => !v,
            _ => false,
        },
        Gate::Xor(x, y) => match (e.bit(x), e.bit(y)) {
            (Some(a), Some(b)) => v == (a ^ b),
            _ => false,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn constructive_implies_unique((inputs, gates) in spec_strategy()) {
        let c = build(inputs, &gates);
        for x in all_inputs(inputs) {
            let e = evaluate(&c, &x).unwrap();
            let all = enumerate_assignments(&c, &x, true).unwrap();
            // Anything propagation resolves holds in every valid assignment.
            for a in &all.assignments {
                for w in wires(&c) {
                    if let Some(v) = e.bit(w) {
                        prop_assert_eq!(a[w.index()], v);
                    }
                }
            }
            if e.is_complete() {
                prop_assert_eq!(all.count, 1);
                let resolved: Vec<bool> = wires(&c).map(|w| e.bit(w).unwrap()).collect();
                prop_assert_eq!(&all.assignments[0], &resolved);
            }
        }
    }

    #[test]
    fn resolved_wires_obey_their_gates((inputs, gates) in spec_strategy()) {
        let c = build(inputs, &gates);
        for x in all_inputs(inputs) {
            let e = evaluate(&c, &x).unwrap();
            for w in wires(&c) {
                if e.bit(w).is_some() {
                    prop_assert!(gate_holds(&c, &e, w), "wire {:?} gate {:?}", w, c.gate(w));
                }
            }
        }
    }

    #[test]
    fn delays_are_lawful_and_least((inputs, gates) in spec_strategy()) {
        let c = build(inputs, &gates);
        for x in all_inputs(inputs) {
            let e = evaluate(&c, &x).unwrap();
            if !e.is_complete() {
                continue;
            }
            for w in wires(&c) {
                let d = e.delay(w).unwrap();
                prop_assert!(delay_ok(&c, &e, w, d), "wire {:?} delay {}", w, d);
                if matches!(c.gate(w), Gate::Input(_) | Gate::Const1) {
                    prop_assert_eq!(d, 0);
                } else {
                    prop_assert!(d > 0 && !delay_ok(&c, &e, w, d - 1), "wire {:?} delay {} not least", w, d);
                }
            }
            prop_assert_eq!(measured_delay(&e).unwrap(), wires(&c).map(|w| e.delay(w).unwrap()).max().unwrap());
        }
    }

    #[test]
    fn evaluation_is_deterministic((inputs, gates) in spec_strategy(), seed in any::<u32>()) {
        let c = build(inputs, &gates);
        let x: Vec<bool> = (0..inputs).map(|i| (seed >> i) & 1 == 1).collect();
        let a = evaluate(&c, &x).unwrap();
        let b = evaluate(&c.clone(), &x).unwrap();
        for w in wires(&c) {
            prop_assert_eq!(a.value(w), b.value(w));
            prop_assert_eq!(a.delay(w), b.delay(w));
        }
    }

    #[test]
    fn netlist_round_trips((inputs, gates) in spec_strategy()) {
        let c = build(inputs, &gates);
        let text = netlist_string(&c);
        let back = parse_netlist(text.as_bytes()).unwrap();
        prop_assert_eq!(netlist_string(&back), text);
    }
}

#[test]
fn enumeration_examples() {
    let mut b = CircuitBuilder::new();
    let x = b.input();
    let y = b.reserve();
    b.define(y, GateKind::And, &[x, y]).unwrap();
    b.output(y);
    let c = b.finalize().unwrap();
    assert_eq!(enumerate_assignments(&c, &[true], false).unwrap().count, 2);
    assert_eq!(enumerate_assignments(&c, &[false], false).unwrap().count, 1);
    let e = evaluate(&c, &[true]).unwrap();
    assert_eq!(read_outputs(&e, &c).unwrap_err().wires, vec![y]);

    let mut b = CircuitBuilder::new();
    let y = b.reserve();
    let one = b.const1();
    b.define(y, GateKind::Xor, &[y, one]).unwrap();
    b.output(y);
    let c = b.finalize().unwrap();
    assert_eq!(enumerate_assignments(&c, &[], false).unwrap().count, 0);
}

#[test]
fn enumeration_refuses_large_circuits() {
    let mut b = CircuitBuilder::new();
    for _ in 0..=ENUMERATION_LIMIT {
        b.const1();
    }
    let c = b.finalize().unwrap();
    assert!(matches!(enumerate_assignments(&c, &[], false), Err(CircuitError::TooLarge { .. })));
}

#[test]
fn acyclic_circuits_have_one_assignment() {
    let mut b = CircuitBuilder::new();
    let x: Bus = (0..3).map(|_| b.input()).collect();
    let y: Bus = (0..3).map(|_| b.input()).collect();
    let s = ripple_add(&mut b, &x, &y).unwrap();
    for w in s {
        b.output(w);
    }
    let c = b.finalize().unwrap();
    assert!(c.len() - 6 <= ENUMERATION_LIMIT);
    for x in all_inputs(6) {
        assert_eq!(enumerate_assignments(&c, &x, false).unwrap().count, 1);
        assert!(evaluate(&c, &x).unwrap().is_complete());
    }
}

#[test]
fn three_mux_cycle_composes() {
    type F = fn(&mut CircuitBuilder, WireId) -> WireId;
    let not: F = |b, x| b.not(x);
    let zero: F = |b, _| b.zero();
    let id: F = |_, x| x;
    let table: [(F, fn(bool) -> bool); 3] = [(not, |v| !v), (zero, |_| false), (id, |v| v)];
    for (fi, gi) in [(0, 1), (2, 0), (1, 0)] {
        let mut b = CircuitBuilder::new();
        let s = b.input();
        let x = b.input();
        let out = choice_cycle(&mut b, s, x, table[fi].0, table[gi].0);
        b.output(out);
        let c = b.finalize().unwrap();
        let (f, g) = (table[fi].1, table[gi].1);
        for sv in [false, true] {
            for xv in [false, true] {
                let e = evaluate(&c, &[sv, xv]).unwrap();
                let want = if sv { f(g(xv)) } else { g(f(xv)) };
                assert_eq!(e.bit(out), Some(want), "f={fi} g={gi} s={sv} x={xv}");
                assert_eq!(enumerate_assignments(&c, &[sv, xv], false).unwrap().count, 1);
            }
        }
    }
    // f = x⊕1, g = 0: s=0,x=0 gives 0 and s=1,x=0 gives 1
    let mut b = CircuitBuilder::new();
    let s = b.input();
    let x = b.input();
    let out = choice_cycle(&mut b, s, x, not, zero);
    b.output(out);
    let c = b.finalize().unwrap();
    assert_eq!(read_outputs(&evaluate(&c, &[false, false]).unwrap(), &c).unwrap(), vec![false]);
    assert_eq!(read_outputs(&evaluate(&c, &[true, false]).unwrap(), &c).unwrap(), vec![true]);
}

fn word_bits(v: u64, w: usize) -> Vec<bool> {
    let mut out = Vec::new();
    push_word(&mut out, v, w);
    out
}

#[test]
fn swap_table_is_exhaustive() {
    for w in 1..=3usize {
        let mut b = CircuitBuilder::new();
        let s = b.input();
        let x: Bus = (0..w).map(|_| b.input()).collect();
        let y: Bus = (0..w).map(|_| b.input()).collect();
        let (p, q) = swap_bus(&mut b, s, &x, &y).unwrap();
        let c = b.finalize().unwrap();
        for sv in [false, true] {
            for xv in 0..1u64 << w {
                for yv in 0..1u64 << w {
                    let mut input = vec![sv];
                    input.extend(word_bits(xv, w));
                    input.extend(word_bits(yv, w));
                    let e = evaluate(&c, &input).unwrap();
                    let want = if sv { (yv, xv) } else { (xv, yv) };
                    assert_eq!((e.word(&p), e.word(&q)), (Some(want.0), Some(want.1)));
                }
            }
        }
    }
}

#[test]
fn swap_of_two_bit_words() {
    let mut b = CircuitBuilder::new();
    let s = b.one();
    let x = const_bus(&mut b, 0b01, 2);
    let y = const_bus(&mut b, 0b10, 2);
    let (p, q) = swap_bus(&mut b, s, &x, &y).unwrap();
    let e = evaluate(&b.finalize().unwrap(), &[]).unwrap();
    assert_eq!((e.word(&p), e.word(&q)), (Some(0b10), Some(0b01)));
}

/// A bus whose every bit is an unresolvable self-loop `y = 1·y`.
fn stuck_bus(b: &mut CircuitBuilder, w: usize) -> Bus {
    let one = b.one();
    (0..w)
        .map(|_| {
            let y = b.reserve();
            b.define(y, GateKind::And, &[one, y]).unwrap();
            y
        })
        .collect()
}

#[test]
fn mux_is_eager_on_both_sides() {
    let mut b = CircuitBuilder::new();
    let s = b.input();
    let x = const_bus(&mut b, 0b101, 3);
    let stuck = stuck_bus(&mut b, 3);
    let left = mux_bus(&mut b, s, &x, &stuck).unwrap();
    let right = mux_bus(&mut b, s, &stuck, &x).unwrap();
    let c = b.finalize().unwrap();
    let e = evaluate(&c, &[false]).unwrap();
    assert_eq!(e.word(&left), Some(0b101));
    assert_eq!(e.word(&right), None);
    let e = evaluate(&c, &[true]).unwrap();
    assert_eq!(e.word(&left), None);
    assert_eq!(e.word(&right), Some(0b101));

    let mut b = CircuitBuilder::new();
    let s = b.one();
    let x = const_bus(&mut b, 0, 2);
    let y = const_bus(&mut b, 3, 2);
    let m = mux_bus(&mut b, s, &x, &y).unwrap();
    assert_eq!(evaluate(&b.finalize().unwrap(), &[]).unwrap().word(&m), Some(3));
}

#[test]
fn swap_forwards_past_a_stuck_side() {
    for w in 1..=3usize {
        let mut b = CircuitBuilder::new();
        let s = b.input();
        let x: Bus = (0..w).map(|_| b.input()).collect();
        let stuck = stuck_bus(&mut b, w);
        let (p, q) = swap_bus(&mut b, s, &x, &stuck).unwrap();
        let c = b.finalize().unwrap();
        for xv in 0..1u64 << w {
            let mut input = vec![true];
            input.extend(word_bits(xv, w));
            let e = evaluate(&c, &input).unwrap();
            assert_eq!((e.word(&p), e.word(&q)), (None, Some(xv)));
            input[0] = false;
            let e = evaluate(&c, &input).unwrap();
            assert_eq!((e.word(&p), e.word(&q)), (Some(xv), None));
        }
    }
}

#[test]
fn adder_matches_integers() {
    for w in 0..=6usize {
        let mut b = CircuitBuilder::new();
        let x: Bus = (0..w).map(|_| b.input()).collect();
        let y: Bus = (0..w).map(|_| b.input()).collect();
        let sum = ripple_add(&mut b, &x, &y).unwrap();
        let c = b.finalize().unwrap();
        assert_eq!(sum.len(), w + 1);
        for xv in 0..1u64 << w {
            for yv in 0..1u64 << w {
                let mut input = word_bits(xv, w);
                input.extend(word_bits(yv, w));
                let e = evaluate(&c, &input).unwrap();
                assert_eq!(e.word(&sum), Some(xv + yv), "w={w} {xv}+{yv}");
            }
        }
    }
}

#[test]
fn adder_lsb_delay_is_width_independent() {
    let mut lsb = Vec::new();
    for w in [4usize, 8, 16] {
        let mut b = CircuitBuilder::new();
        let x: Bus = (0..w).map(|_| b.input()).collect();
        let y: Bus = (0..w).map(|_| b.input()).collect();
        let sum = ripple_add(&mut b, &x, &y).unwrap();
        let c = b.finalize().unwrap();
        let mut worst = vec![0u32; w + 1];
        for seed in 0..64u64 {
            let xv = seed.wrapping_mul(0x9e37_79b9) & ((1 << w) - 1);
            let yv = seed.wrapping_mul(0x85eb_ca6b) & ((1 << w) - 1);
            let mut input = word_bits(xv, w);
            input.extend(word_bits(yv, w));
            let e = evaluate(&c, &input).unwrap();
            for (i, &s) in sum.iter().rev().enumerate() {
                worst[i] = worst[i].max(e.delay(s).unwrap());
            }
        }
        // i-th lsb within a constant times i
        for (i, &d) in worst.iter().enumerate() {
            assert!(d as usize <= 3 * (i + 1), "w={w} bit {i} delay {d}");
        }
        lsb.push(worst[0]);
    }
    assert!(lsb.windows(2).all(|p| p[0] == p[1]), "{lsb:?}");
}

#[test]
fn comparators_match_integers() {
    let w = 4;
    let mut b = CircuitBuilder::new();
    let x: Bus = (0..w).map(|_| b.input()).collect();
    let y: Bus = (0..w).map(|_| b.input()).collect();
    let le = leq_compare(&mut b, &x, &y).unwrap();
    let eq = eq_compare(&mut b, &x, &y).unwrap();
    let c = b.finalize().unwrap();
    for xv in 0..16u64 {
        for yv in 0..16u64 {
            let mut input = word_bits(xv, w);
            input.extend(word_bits(yv, w));
            let e = evaluate(&c, &input).unwrap();
            assert_eq!(e.bit(le), Some(xv <= yv));
            assert_eq!(e.bit(eq), Some(xv == yv));
        }
    }
    let mut b = CircuitBuilder::new();
    let x = const_bus(&mut b, 0b011, 3);
    let y = const_bus(&mut b, 0b010, 3);
    let a = leq_compare(&mut b, &x, &y).unwrap();
    let r = leq_compare(&mut b, &y, &y).unwrap();
    let e = evaluate(&b.finalize().unwrap(), &[]).unwrap();
    assert_eq!((e.bit(a), e.bit(r)), (Some(false), Some(true)));
}

#[test]
fn width_errors() {
    let mut b = CircuitBuilder::new();
    let x: Bus = (0..3).map(|_| b.input()).collect();
    let y: Bus = (0..2).map(|_| b.input()).collect();
    assert_eq!(mux_bus(&mut b, x[0], &x, &y), Err(WidthError::Mismatch(3, 2)));
    assert!(swap_bus(&mut b, x[0], &x, &y).is_err());
    assert!(ripple_add(&mut b, &x, &y).is_err());
    assert!(leq_compare(&mut b, &x, &y).is_err());
    assert!(eq_compare(&mut b, &x, &y).is_err());
}
