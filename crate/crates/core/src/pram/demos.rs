//! Demo PRAM programs.

use crate::psam::isa::*;

use super::machine::{PramAsm, PramProgram};

const I: Reg = 1;
const S: Reg = 2;
const X: Reg = 3;

/// Buckets in the parallel-increment demo.
pub const BUCKETS: u64 = 8;

/// `n` processors (a power of two) each read one input word `v` and write
/// `v + 1` to bucket `2 + v mod 8` and to the shared cell 1, so every
/// simultaneous write goes through the conflict operator. The root then
/// outputs cell 1 followed by the buckets.
pub fn parallel_increment(n: u64) -> PramProgram {
    assert!(n.is_power_of_two(), "n must be a power of two");
    let mut a = PramAsm::new(4, 12, 4);
    a.update(vec![(S, k(1))]);
    a.label("grow");
    a.update(vec![(PC, mux(ltu(reg(S), k(n)), label("split"), label("work")))]);
    a.label("split");
    // The child joins at the next line so both stay in lockstep.
    a.fork(vec![(I, add(reg(I), reg(S)))], "double");
    a.label("double");
    a.goto(vec![(S, add(reg(S), reg(S)))], "grow");
    a.label("work");
    a.input(X);
    a.update(vec![
        (S, eq(reg(I), k(0))),
        (I, add(and(reg(X), k(BUCKETS - 1)), k(2))),
        (X, add(reg(X), k(1))),
    ]);
    a.write(I, X);
    a.update(vec![(I, k(1))]);
    a.write(I, X);
    a.branch(reg(S), "report");
    a.die();
    a.label("report");
    a.update(vec![(I, k(1))]);
    a.label("next");
    a.read(I, X);
    a.output(X);
    a.update(vec![
        (I, add(reg(I), k(1))),
        (PC, mux(leq(reg(I), k(BUCKETS)), label("next"), k(a.here() as u64 + 1))),
    ]);
    a.die();
    a.finish().expect("parallel increment assembles")
}

/// Host oracle for `parallel_increment` under `star`.
pub fn parallel_increment_expected(input: &[u64], n: u64, star: super::StarOp) -> Vec<u64> {
    let wp = 12;
    let mut cells: Vec<Option<u64>> = vec![None; BUCKETS as usize + 1];
    for i in 0..n as usize {
        let v = input.get(i).copied().unwrap_or(0) & mask(wp);
        let x = (v + 1) & mask(wp);
        for c in [0, 1 + (v & (BUCKETS - 1)) as usize] {
            cells[c] = Some(cells[c].map_or(x, |acc| star.apply(acc, x, wp)));
        }
    }
    cells.into_iter().map(|c| c.unwrap_or(0)).collect()
}

/// Outputs a constant and stops.
pub fn trivial(value: u64) -> PramProgram {
    let mut a = PramAsm::new(2, 8, 1);
    a.update(vec![(1, k(value))]);
    a.output(1);
    a.die();
    a.finish().expect("trivial program assembles")
}

/// Writes 7 to address 3, reads it back and outputs it.
pub fn write_read() -> PramProgram {
    let mut a = PramAsm::new(3, 8, 2);
    a.update(vec![(1, k(3)), (2, k(7))]);
    a.write(1, 2);
    a.update(vec![(2, k(0))]);
    a.read(1, 2);
    a.output(2);
    a.die();
    a.finish().expect("write/read program assembles")
}

/// Two processors write the first two input words to address 1 in the same
/// step; a third processor reads the cell afterwards and outputs it.
pub fn conflict() -> PramProgram {
    let mut a = PramAsm::new(3, 8, 2);
    a.input(2);
    a.fork(vec![], "second");
    a.update(vec![]);
    a.update(vec![(1, k(1))]);
    a.write(1, 2);
    a.fork(vec![], "reader");
    a.die();
    a.label("second");
    a.input(2);
    a.update(vec![(1, k(1))]);
    a.write(1, 2);
    a.die();
    a.label("reader");
    a.read(1, 2);
    a.output(2);
    a.die();
    a.finish().expect("conflict program assembles")
}

/// Reads an unwritten address and outputs what it saw plus one.
pub fn read_fresh() -> PramProgram {
    let mut a = PramAsm::new(3, 8, 3);
    a.update(vec![(1, k(5))]);
    a.read(1, 2);
    a.update(vec![(2, add(reg(2), k(1)))]);
    a.output(2);
    a.die();
    a.finish().expect("read-fresh program assembles")
}

/// Names accepted by `by_name`.
pub const NAMES: [&str; 5] = ["parallel-increment", "trivial", "write-read", "conflict", "read-fresh"];

pub fn by_name(name: &str, n: u64) -> Option<PramProgram> {
    Some(match name {
        "parallel-increment" => parallel_increment(n),
        "trivial" => trivial(42),
        "write-read" => write_read(),
        "conflict" => conflict(),
        "read-fresh" => read_fresh(),
        _ => return None,
    })
}
