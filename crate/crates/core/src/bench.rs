//! Scaling measurements shared by the CLI and the acceptance suite.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{evaluate, push_word, CircuitBuilder};
use crate::gadgets::Bus;
use crate::pram::demos::{parallel_increment, parallel_increment_expected};
use crate::pram::{compile_pram_to_psam, pram_run, CompileOptions, PramLimits, StarOp};
use crate::psam::demos::spread_program;
use crate::psam::synth::{required_capacity, synthesize, SynthOptions};
use crate::psam::{psam_run, Limits};
use crate::routing::build_permute;

/// `CYCLIC_SEED` from the environment, else `default`.
pub fn env_seed(default: u64) -> u64 {
    std::env::var("CYCLIC_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}

fn lg(n: u64) -> f64 {
    (n as f64).log2()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoutingRow {
    pub n: usize,
    pub w: usize,
    pub gates: usize,
    pub delay: u32,
    pub size_ratio: f64,
    pub delay_ratio: f64,
}

impl RoutingRow {
    pub const HEADER: &'static str = "n,w,gates,delay,gates_per_wnlog2n,delay_per_log2n";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.4}",
            self.n, self.w, self.gates, self.delay, self.size_ratio, self.delay_ratio
        )
    }
}

/// Builds `permute` on `n` words of `w` payload bits and routes one random
/// permutation through it.
pub fn routing_row(n: usize, w: usize, rng: &mut ChaCha8Rng) -> RoutingRow {
    let log = n.trailing_zeros() as usize;
    let mut b = CircuitBuilder::new();
    let x: Vec<Bus> = (0..n).map(|_| (0..log + w).map(|_| b.input()).collect()).collect();
    let y = build_permute(&mut b, &x, w);
    for bus in &y {
        for &wire in bus {
            b.output(wire);
        }
    }
    let c = b.finalize().expect("permute is well formed");
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut input = Vec::with_capacity(n * (log + w));
    let payloads: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1u64 << w)).collect();
    for (k, &t) in perm.iter().enumerate() {
        push_word(&mut input, ((t as u64) << w) | payloads[k], log + w);
    }
    let e = evaluate(&c, &input).expect("input width");
    for (k, &t) in perm.iter().enumerate() {
        assert_eq!(e.word(&y[t]), Some(payloads[k]), "permute misrouted word {k}");
    }
    let delay = e.max_delay(c.outputs()).expect("permute resolves");
    let gates = c.logic_gate_count();
    let l2 = lg(n as u64).powi(2);
    RoutingRow {
        n,
        w,
        gates,
        delay,
        size_ratio: gates as f64 / (w as f64 * n as f64 * l2),
        delay_ratio: delay as f64 / l2,
    }
}

pub fn routing_suite(ns: &[usize], w: usize, seed: u64) -> Vec<RoutingRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ns.iter().map(|&n| routing_row(n, w, &mut rng)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsamRow {
    pub capacity: usize,
    pub work: u64,
    pub time: u64,
    pub gates: usize,
    pub delay: u32,
    pub ratio: f64,
}

impl PsamRow {
    pub const HEADER: &'static str = "capacity,psam_work,psam_time,gates,delay,gates_per_work_log3n";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4}",
            self.capacity, self.work, self.time, self.gates, self.delay, self.ratio
        )
    }
}

/// Word width of the spread workload.
pub const SPREAD_W: u32 = 12;

/// Deepest spread workload whose interpreter run fits `capacity` units.
pub fn spread_for(capacity: usize) -> (crate::psam::Program, crate::psam::Run) {
    let mut best = None;
    for depth in 1..24 {
        let p = spread_program(depth, SPREAD_W);
        let run = psam_run(&p, &[], Limits::default()).expect("spread runs");
        if required_capacity(&run, 0) > capacity {
            break;
        }
        best = Some((p, run));
    }
    best.expect("capacity too small for any spread tree")
}

/// Synthesizes a spread workload sized to `capacity` and checks the circuit
/// against the interpreter.
pub fn psam_row(capacity: usize) -> PsamRow {
    let (p, run) = spread_for(capacity);
    let synth = synthesize(&p, &SynthOptions::new(capacity)).expect("synthesis");
    let out = synth.run(&[]).expect("evaluation");
    assert!(out.report.is_clean(), "stuck wires: {}", out.report.render());
    let want = run.output().expect("spread halts");
    let got = out.output.expect("outputs resolve");
    assert_eq!(&got[..want.len()], want, "circuit output differs");
    let gates = synth.circuit.logic_gate_count();
    let work = run.trace.work;
    PsamRow {
        capacity,
        work,
        time: run.trace.time,
        gates,
        delay: out.delay.unwrap_or(0),
        ratio: gates as f64 / (work as f64 * lg(capacity as u64).powi(3)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PramRow {
    pub n: u64,
    pub star: StarOp,
    pub work: u64,
    pub time: u64,
    pub psam_work: u64,
    pub psam_time: u64,
    pub work_ratio: f64,
    pub time_ratio: f64,
}

impl PramRow {
    pub const HEADER: &'static str = "n,star,W,T,psam_work,psam_time,work_per_wlogn,time_per_tlogn";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.4},{:.4}",
            self.n,
            self.star.name(),
            self.work,
            self.time,
            self.psam_work,
            self.psam_time,
            self.work_ratio,
            self.time_ratio
        )
    }
}

/// Random inputs for the parallel-increment demo.
pub fn increment_input(n: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(0..100)).collect()
}

/// Limits loose enough for every bench point.
pub fn wide_limits() -> Limits {
    Limits {
        max_lineage: 4096,
        max_work: u64::MAX,
        max_time: u64::MAX,
    }
}

/// Runs parallel-increment on the reference machine and compiled onto the
/// PSAM, asserting equal outputs.
pub fn pram_row(n: u64, star: StarOp, rng: &mut ChaCha8Rng) -> PramRow {
    let p = parallel_increment(n);
    let input = increment_input(n, rng);
    let r = pram_run(&p, &input, star, PramLimits::default()).expect("reference run");
    assert_eq!(r.output, parallel_increment_expected(&input, n, star));
    let opts = CompileOptions {
        pid_bits: r.stats.pid_bits,
        psam_addr_bits: 24,
    };
    let c = compile_pram_to_psam(&p, star, opts).expect("compiles");
    let run = psam_run(&c.program, &input, wide_limits()).expect("compiled run");
    assert_eq!(run.output(), Some(&r.output[..]), "compiled output differs");
    let l = lg(n);
    PramRow {
        n,
        star,
        work: r.stats.work,
        time: r.stats.time,
        psam_work: run.trace.work,
        psam_time: run.trace.time,
        work_ratio: run.trace.work as f64 / (r.stats.work as f64 * l),
        time_ratio: run.trace.time as f64 / (r.stats.time as f64 * l),
    }
}

pub fn pram_suite(ns: &[u64], star: StarOp, seed: u64) -> Vec<PramRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ns.iter().map(|&n| pram_row(n, star, &mut rng)).collect()
}

/// Largest relative change between consecutive values.
pub fn max_drift(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|p| (p[1] - p[0]).abs() / p[0].abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}
