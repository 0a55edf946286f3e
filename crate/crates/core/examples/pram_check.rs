//! Compiles parallel-increment onto the PSAM and checks the tree invariant
//! at every PRAM step.

use cyclic_core::bench::{env_seed, increment_input, wide_limits};
use cyclic_core::pram::demos::parallel_increment;
use cyclic_core::pram::*;
use rand::SeedableRng;

fn main() {
    let n = 16;
    let p = parallel_increment(n);
    let input = increment_input(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(env_seed(7)));
    let r = pram_run(&p, &input, StarOp::Max, PramLimits::default()).unwrap();
    let c = compile_pram_to_psam(&p, StarOp::Max, CompileOptions { pid_bits: r.stats.pid_bits, psam_addr_bits: 24 }).unwrap();
    let report = check_compiled(&c, &p, &input, None, wide_limits()).unwrap();
    println!("output={:?}", r.output);
    println!("step,procs,psam_time,psam_work");
    for s in &report.steps {
        println!("{},{},{},{}", s.pram_step, s.procs, s.psam_time, s.psam_work);
    }
}
