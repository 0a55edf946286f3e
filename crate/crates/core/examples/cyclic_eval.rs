//! A self-loop `y = x·y`: constructive evaluation against brute force.

use cyclic_core::circuit::*;

fn main() {
    let mut b = CircuitBuilder::new();
    let x = b.input();
    let y = b.reserve();
    b.define(y, GateKind::And, &[x, y]).unwrap();
    b.output(y);
    let c = b.finalize().unwrap();
    print!("{}", netlist_string(&c));
    for bit in [false, true] {
        let e = evaluate(&c, &[bit]).unwrap();
        let n = enumerate_assignments(&c, &[bit], false).unwrap().count;
        match read_outputs(&e, &c) {
            Ok(out) => println!("x={} -> y={} delay={} assignments={n}", bit as u8, format_bits(&out), e.delay(y).unwrap()),
            Err(u) => println!("x={} -> {u} assignments={n}", bit as u8),
        }
    }
}
