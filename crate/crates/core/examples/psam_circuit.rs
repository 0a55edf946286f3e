//! Synthesizes the fold program into a cyclic circuit and evaluates it.

use cyclic_core::psam::demos::*;
use cyclic_core::psam::synth::*;
use cyclic_core::psam::{psam_run, Limits};

fn main() {
    let cfg = FoldConfig { addr_bits: 10 };
    let p = fold_program(cfg, FoldOp::Sum);
    let tape = cfg.tape(&Tree::balanced(&[3, 5, 8, 13]));
    let run = psam_run(&p, &tape, Limits::default()).unwrap();
    let cap = required_capacity(&run, tape.len());
    let pc = synthesize(&p, &SynthOptions::new(cap)).unwrap();
    let out = pc.run(&tape).unwrap();
    println!("capacity={cap} gates={}", pc.circuit.logic_gate_count());
    println!("interpreter={:?}", run.output());
    println!("circuit={:?} delay={:?}", out.output.map(|o| o[0]), out.delay);
    print!("{}", out.report.render());
}
