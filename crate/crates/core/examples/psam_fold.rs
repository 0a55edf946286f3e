//! Folds a random tree on the PSAM interpreter and prints its trace head.

use cyclic_core::bench::env_seed;
use cyclic_core::psam::demos::*;
use cyclic_core::psam::{check_clean, psam_run, Limits};
use rand::SeedableRng;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(env_seed(5));
    let tree = Tree::random(&mut rng, 6, 100);
    let cfg = FoldConfig { addr_bits: 10 };
    let run = psam_run(&fold_program(cfg, FoldOp::Sum), &cfg.tape(&tree), Limits::default()).unwrap();
    println!("sum={:?} oracle={}", run.output(), tree.fold(FoldOp::Sum));
    println!("work={} time={} clean={}", run.trace.work, run.trace.time, check_clean(&run.trace));
    for line in run.trace.render().lines().take(8) {
        println!("{line}");
    }
}
