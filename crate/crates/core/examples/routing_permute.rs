//! Routes a random permutation through `permute` and reports size and delay.

use cyclic_core::bench::{env_seed, routing_row, RoutingRow};
use rand::SeedableRng;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(env_seed(3));
    println!("{}", RoutingRow::HEADER);
    for n in [8, 16, 32, 64, 128] {
        println!("{}", routing_row(n, 4, &mut rng).csv());
    }
}
