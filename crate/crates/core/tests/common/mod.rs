#![allow(dead_code)]

use ids_core::table::DiscreteTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("c{c}")).collect()
}

/// Small random discrete table whose first feature tracks the class with
/// probability `signal`; the rest are noise.
pub fn random_table(seed: u64, signal: f64) -> DiscreteTable {
    let mut r = rng(seed);
    let n = r.gen_range(20..60);
    let n_classes = r.gen_range(2..=3u32);
    let n_features = r.gen_range(2..=4);
    let classes: Vec<u32> = (0..n).map(|_| r.gen_range(0..n_classes)).collect();
    let columns = (0..n_features)
        .map(|j| {
            let card = r.gen_range(2..=4u32);
            classes
                .iter()
                .map(|&c| {
                    if j == 0 && r.gen_bool(signal) {
                        c % card
                    } else {
                        r.gen_range(0..card)
                    }
                })
                .collect()
        })
        .collect();
    DiscreteTable::from_codes(columns, classes, labels(n_classes as usize)).unwrap()
}
