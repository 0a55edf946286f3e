//! Simulation overhead of the parallel-increment demo as n doubles.

use cyclic_core::pram::demos::parallel_increment;
use cyclic_core::pram::*;
use cyclic_core::psam::{psam_run, Limits};
use rand::{Rng, SeedableRng};

fn main() {
    let seed = std::env::var("CYCLIC_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    println!("n,W,T,psam_work,psam_time,work_ratio,time_ratio");
    for n in [16u64, 32, 64, 128, 256] {
        let p = parallel_increment(n);
        let input: Vec<u64> = (0..n).map(|_| rng.gen_range(0..100)).collect();
        let r = pram_run(&p, &input, StarOp::Add, PramLimits::default()).unwrap();
        let c = compile_pram_to_psam(&p, StarOp::Add, CompileOptions { pid_bits: r.stats.pid_bits, psam_addr_bits: 24 }).unwrap();
        let limits = Limits { max_lineage: 4096, max_work: u64::MAX, max_time: u64::MAX };
        let run = psam_run(&c.program, &input, limits).unwrap();
        assert_eq!(run.output(), Some(&r.output[..]));
        let lg = (n as f64).log2();
        println!(
            "{n},{},{},{},{},{:.2},{:.2}",
            r.stats.work,
            r.stats.time,
            run.trace.work,
            run.trace.time,
            run.trace.work as f64 / (r.stats.work as f64 * lg),
            run.trace.time as f64 / (r.stats.time as f64 * lg)
        );
    }
}
