//! The swap gadget forwards its resolved side while the other is stuck.

use cyclic_core::circuit::*;
use cyclic_core::gadgets::*;

fn main() {
    let mut b = CircuitBuilder::new();
    let s = b.input();
    let x = const_bus(&mut b, 0b1011, 4);
    let one = b.one();
    let stuck: Bus = (0..4)
        .map(|_| {
            let y = b.reserve();
            b.define(y, GateKind::And, &[one, y]).unwrap();
            y
        })
        .collect();
    let (p, q) = swap_bus(&mut b, s, &x, &stuck).unwrap();
    let c = b.finalize().unwrap();
    let show = |v: Option<u64>| v.map_or("⊥".to_string(), |v| format!("{v:04b}"));
    for sv in [false, true] {
        let e = evaluate(&c, &[sv]).unwrap();
        println!("swap({}, 1011, ⊥) = ({}, {})", sv as u8, show(e.word(&p)), show(e.word(&q)));
    }
}
